//! Benchmark sweep over instances, `p` values and relocation budgets.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::instance::Instance;
use crate::solver::Solver;

/// A relocation budget: a fixed count or "relocate at every instant".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Budget {
    Fixed(usize),
    All,
}

impl Budget {
    pub fn resolve(self, num_instants: usize) -> usize {
        match self {
            Budget::Fixed(k) => k,
            Budget::All => num_instants,
        }
    }
}

impl FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" | "M" => Ok(Budget::All),
            t => t
                .parse()
                .map(Budget::Fixed)
                .map_err(|_| format!("invalid relocation budget {s:?}")),
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Fixed(k) => write!(f, "{k}"),
            Budget::All => f.write_str("all"),
        }
    }
}

/// Per-`(p, K)` averages across instances. Column order is the CSV layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub p: usize,
    #[serde(rename = "K")]
    pub k: String,
    pub gap: f64,
    pub phase1_s: f64,
    pub phase2_s: f64,
    pub total_s: f64,
    pub gain: f64,
}

pub const CSV_COLUMNS: [&str; 7] = ["p", "K", "gap", "phase1_s", "phase2_s", "total_s", "gain"];

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub instance: String,
    pub p: usize,
    pub budget: Budget,
    pub message: String,
}

/// One solved `(instance, p, K)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub instance: String,
    pub p: usize,
    pub budget: Budget,
    pub k: usize,
    pub gap: f64,
    pub gain: f64,
    pub phase1_s: f64,
    pub phase2_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn row(&self, p: usize, k: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.p == p && r.k == k)
    }
}

/// Solves every `(instance, p, K)` cell, always including `K = M`, and
/// averages per `(p, K)`. Failed cells are recorded and left out of the
/// averages.
pub fn run_bench(instances: &[Instance], ps: &[usize], budgets: &[Budget]) -> BenchReport {
    let mut budgets = budgets.to_vec();
    if !budgets.contains(&Budget::All) {
        budgets.push(Budget::All);
    }
    budgets.sort();
    budgets.dedup();

    let outcomes: Vec<Vec<Result<CellResult, CellFailure>>> = instances
        .par_iter()
        .map(|inst| solve_instance(inst, ps, &budgets))
        .collect();

    let mut report = BenchReport::default();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(cell) => report.cells.push(cell),
            Err(failure) => report.failures.push(failure),
        }
    }

    // a fixed K equal to every instance's M would duplicate the "all" row
    let common_m = instances
        .iter()
        .map(|i| i.network.horizon().num_instants())
        .reduce(|a, b| if a == b { a } else { usize::MAX });
    for &p in ps {
        for &budget in &budgets {
            let cells: Vec<&CellResult> = report.cells.iter().filter(|c| c.p == p && c.budget == budget).collect();
            if cells.is_empty() {
                continue;
            }
            let n = cells.len() as f64;
            let mean = |f: fn(&CellResult) -> f64| cells.iter().map(|c| f(c)).sum::<f64>() / n;
            let k = match (budget, common_m) {
                (Budget::All, Some(m)) if m != usize::MAX => m.to_string(),
                _ => budget.to_string(),
            };
            report.rows.push(BenchRow {
                p,
                k,
                gap: mean(|c| c.gap),
                phase1_s: mean(|c| c.phase1_s),
                phase2_s: mean(|c| c.phase2_s),
                total_s: mean(|c| c.total_s),
                gain: mean(|c| c.gain),
            });
        }
    }
    report
}

fn solve_instance(inst: &Instance, ps: &[usize], budgets: &[Budget]) -> Vec<Result<CellResult, CellFailure>> {
    let fail = |p: usize, budget: Budget, message: String| CellFailure {
        instance: inst.name.clone(),
        p,
        budget,
        message,
    };
    let solver = match Solver::new(&inst.network) {
        Ok(s) => s,
        Err(e) => {
            return ps
                .iter()
                .flat_map(|&p| budgets.iter().map(move |&b| (p, b)))
                .map(|(p, b)| Err(fail(p, b, e.to_string())))
                .collect()
        }
    };
    let m = inst.network.horizon().num_instants();
    let mut out = Vec::new();
    for &p in ps {
        for &budget in budgets {
            let k = budget.resolve(m);
            out.push(match solver.solve(p, k, false) {
                Ok(r) => Ok(CellResult {
                    instance: inst.name.clone(),
                    p,
                    budget,
                    k,
                    gap: r.gap,
                    gain: r.gain,
                    phase1_s: r.timings.phase1_s,
                    phase2_s: r.timings.phase2_s,
                    total_s: r.timings.total_s,
                }),
                Err(e) => Err(fail(p, budget, e.to_string())),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbench::generator::{generate_instance, GeneratorConfig};

    #[test]
    fn budget_parsing() {
        assert_eq!("all".parse::<Budget>().unwrap(), Budget::All);
        assert_eq!(" 4".parse::<Budget>().unwrap(), Budget::Fixed(4));
        assert!("x".parse::<Budget>().is_err());
    }

    #[test]
    fn csv_header_exact() {
        let report = BenchReport::default();
        assert_eq!(report.to_csv().trim(), CSV_COLUMNS.join(","));
        let inst = generate_instance(&GeneratorConfig::crossing(6, 4, 1)).unwrap();
        let report = run_bench(&[inst], &[2], &[Budget::Fixed(0)]);
        let header = report.to_csv().lines().next().unwrap().to_string();
        assert_eq!(header, CSV_COLUMNS.join(","));
    }

    #[test]
    fn static_instances_have_zero_gap() {
        let insts: Vec<Instance> = (0..3)
            .map(|s| generate_instance(&GeneratorConfig::static_times(7, 4, s)).unwrap())
            .collect();
        let report = run_bench(&insts, &[2], &[Budget::Fixed(0), Budget::Fixed(2)]);
        assert!(report.failures.is_empty());
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn full_budget_row_and_failures() {
        let insts: Vec<Instance> = (0..2)
            .map(|s| generate_instance(&GeneratorConfig::crossing(6, 3, s)).unwrap())
            .collect();
        let report = run_bench(&insts, &[2], &[Budget::Fixed(1), Budget::Fixed(7)]);
        let all = report.row(2, "3").unwrap();
        assert_eq!((all.gap, all.gain), (0.0, 1.0));
        assert_eq!(report.failures.len(), 2);
        assert!(report.row(2, "7").is_none());
        assert!(report.rows.iter().all(|r| r.gap >= 0.0));
    }
}
