//! Two-phase heuristic for the multi-period p-center problem, with the
//! per-period lower bound, GAP/GAIN metrics and an exhaustive oracle for
//! toy instances.
//!
//! Phase I picks the relocation instants from the speed factorization
//! ([`crate::planner`]); Phase II solves one exact p-center per macro-period
//! on the macro-period worst times and freezes that facility set for every
//! period of the block. Allocations always follow the closest-facility rule
//! on each period's own worst times.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::igp::{delta_of_plan, IgpError};
use crate::pcenter::{allocate, radius, solve_pcenter, Allocation, DistanceMatrix, LocationDecision, PCenterError};
use crate::planner::{
    build_gain_dag, certify_plan, full_horizon_factorization, select_relocations, PlanCertificate, PlannerError,
    RelocationPlan,
};
use crate::tdnet::{build_worst_table, TDNetwork, TdNetError, WorstTimeTable};

/// Work limit of [`exact_small`]: `C(M, K) * C(|F|, p)^(K+1)`.
pub const EXACT_BUDGET: u128 = 10_000_000;

/// [`Solver::solve`] adds the exhaustive no-relocation optimum when
/// `C(|F|, p) * periods * |C|` stays within this limit.
pub const REFERENCE_WORK_BUDGET: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("p = {p} must lie in 1..={facilities}")]
    BadP { p: usize, facilities: usize },
    #[error("K = {k} must lie in 0..={m}")]
    BadK { k: usize, m: usize },
    #[error("lower bound {lb} must be positive to compute relative metrics")]
    NonPositiveBound { lb: f64 },
    #[error("reference objective {reference} lies below the lower bound {lb}")]
    ReferenceBelowBound { reference: f64, lb: f64 },
    #[error("exhaustive search over {count} combinations exceeds the budget")]
    BudgetExceeded { count: u128 },
    #[error(transparent)]
    PCenter(#[from] PCenterError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Igp(#[from] IgpError),
    #[error(transparent)]
    Network(#[from] TdNetError),
}

/// Per-period locations and allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPeriodSolution {
    pub locations: Vec<LocationDecision>,
    pub allocations: Vec<Allocation>,
    /// Radius of every period.
    pub radii: Vec<f64>,
    /// Sum of the period radii.
    pub objective: f64,
    /// Number of periods whose facility set differs from the previous one.
    pub relocations: usize,
    pub plan: RelocationPlan,
}

impl MultiPeriodSolution {
    /// Expands one facility set per macro-period into a full solution,
    /// allocating each period on its own worst times.
    pub fn assemble(periods: &[DistanceMatrix], plan: RelocationPlan, block_sets: &[LocationDecision]) -> Self {
        let block_of = plan.block_of_period();
        let locations: Vec<LocationDecision> = block_of.iter().map(|&k| block_sets[k].clone()).collect();
        let allocations: Vec<Allocation> = locations.iter().zip(periods).map(|(o, d)| allocate(o, d)).collect();
        let radii: Vec<f64> = allocations.iter().zip(periods).map(|(s, d)| radius(s, d)).collect();
        let objective = radii.iter().sum();
        let relocations = locations.windows(2).filter(|w| w[0] != w[1]).count();
        Self {
            locations,
            allocations,
            radii,
            objective,
            relocations,
            plan,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub gap: f64,
    pub gain: f64,
}

/// Relative excess over the lower bound and normalized improvement over
/// the no-relocation reference.
pub fn metrics(objective: f64, lb: f64, reference: f64) -> Result<Metrics, SolverError> {
    if !(lb > 0.0) {
        return Err(SolverError::NonPositiveBound { lb });
    }
    if reference < lb {
        return Err(SolverError::ReferenceBelowBound { reference, lb });
    }
    let gap = (objective - lb) / lb;
    let gain = if reference == lb {
        1.0
    } else {
        (reference - objective) / (reference - lb)
    };
    Ok(Metrics { gap, gain })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub phase1_s: f64,
    pub phase2_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: MultiPeriodSolution,
    pub lower_bound: f64,
    /// Objective of the heuristic without relocations (GAIN reference).
    pub reference: f64,
    pub gap: f64,
    pub gain: f64,
    /// Exhaustive no-relocation optimum; only on instances within
    /// [`REFERENCE_WORK_BUDGET`].
    pub exact_reference: Option<f64>,
    /// GAIN measured against [`SolveReport::exact_reference`].
    pub exact_gain: Option<f64>,
    /// Sum of per-block degradation minima maximized in Phase I; `None`
    /// when Phase I was skipped.
    pub plan_value: Option<f64>,
    pub certificate: Option<PlanCertificate>,
    pub timings: Timings,
}

/// Solver bound to one network; caches worst-time matrices, lower bounds
/// and reference objectives across calls.
pub struct Solver<'a> {
    net: &'a TDNetwork,
    table: WorstTimeTable,
    periods: Vec<DistanceMatrix>,
    bounds: Mutex<HashMap<usize, f64>>,
    references: Mutex<HashMap<usize, f64>>,
}

impl<'a> Solver<'a> {
    pub fn new(net: &'a TDNetwork) -> Result<Self, SolverError> {
        let table = build_worst_table(net)?;
        let periods = (0..table.num_periods())
            .map(|l| DistanceMatrix::new(table.num_facilities(), table.num_customers(), table.period_matrix(l)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            net,
            table,
            periods,
            bounds: Mutex::new(HashMap::new()),
            references: Mutex::new(HashMap::new()),
        })
    }

    pub fn network(&self) -> &TDNetwork {
        self.net
    }

    pub fn table(&self) -> &WorstTimeTable {
        &self.table
    }

    /// Per-period worst-time matrices `d(I_l)`.
    pub fn period_matrices(&self) -> &[DistanceMatrix] {
        &self.periods
    }

    fn num_instants(&self) -> usize {
        self.table.num_periods() - 1
    }

    fn check(&self, p: usize, k: usize) -> Result<(), SolverError> {
        let facilities = self.table.num_facilities();
        if p == 0 || p > facilities {
            return Err(SolverError::BadP { p, facilities });
        }
        if k > self.num_instants() {
            return Err(SolverError::BadK {
                k,
                m: self.num_instants(),
            });
        }
        Ok(())
    }

    /// Optimal p-center of every period, independently.
    pub fn period_optima(&self, p: usize) -> Result<Vec<f64>, SolverError> {
        self.check(p, 0)?;
        let radii = self
            .periods
            .par_iter()
            .map(|d| solve_pcenter(d, p).map(|s| s.radius))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(radii)
    }

    /// Relocating at every instant: the sum of per-period optima bounds
    /// every plan from below.
    pub fn lower_bound(&self, p: usize) -> Result<f64, SolverError> {
        if let Some(&lb) = self.bounds.lock().expect("cache lock").get(&p) {
            return Ok(lb);
        }
        let lb = self.period_optima(p)?.iter().sum();
        self.bounds.lock().expect("cache lock").insert(p, lb);
        Ok(lb)
    }

    /// Heuristic objective without relocations.
    pub fn reference(&self, p: usize) -> Result<f64, SolverError> {
        if let Some(&r) = self.references.lock().expect("cache lock").get(&p) {
            return Ok(r);
        }
        let r = self.heuristic(p, 0)?.0.objective;
        self.references.lock().expect("cache lock").insert(p, r);
        Ok(r)
    }

    /// Both phases, without bounds or metrics.
    pub fn heuristic(&self, p: usize, k: usize) -> Result<(MultiPeriodSolution, Option<f64>, Timings), SolverError> {
        self.check(p, k)?;
        let m = self.num_instants();
        let start = Instant::now();

        let (plan, plan_value) = if k == 0 {
            (RelocationPlan::none(m), None)
        } else if k == m {
            (RelocationPlan::all(m), None)
        } else {
            let fact = full_horizon_factorization(self.net)?;
            let dag = build_gain_dag(&fact)?;
            let selection = select_relocations(&dag, k)?;
            debug_assert!((delta_of_plan(&fact, &selection.plan).sum - selection.value).abs() < 1e-9);
            (selection.plan, Some(selection.value))
        };
        let phase1 = start.elapsed().as_secs_f64();

        let blocks: Vec<_> = plan.blocks().collect();
        let block_sets = blocks
            .par_iter()
            .map(|r| {
                let d = DistanceMatrix::new(
                    self.table.num_facilities(),
                    self.table.num_customers(),
                    self.table.range_matrix(r.clone())?,
                )?;
                Ok(solve_pcenter(&d, p)?.open)
            })
            .collect::<Result<Vec<_>, SolverError>>()?;
        let solution = MultiPeriodSolution::assemble(&self.periods, plan, &block_sets);
        let total = start.elapsed().as_secs_f64();

        let timings = Timings {
            phase1_s: phase1,
            phase2_s: total - phase1,
            total_s: total,
        };
        Ok((solution, plan_value, timings))
    }

    /// Heuristic solution with lower bound and metrics; certifies the plan
    /// when asked.
    pub fn solve(&self, p: usize, k: usize, certify: bool) -> Result<SolveReport, SolverError> {
        let (solution, plan_value, timings) = self.heuristic(p, k)?;
        let lower_bound = self.lower_bound(p)?;
        let reference = if k == 0 { solution.objective } else { self.reference(p)? };
        let Metrics { gap, gain } = metrics(solution.objective, lower_bound, reference)?;
        let certificate = if certify {
            Some(certify_plan(self.net, &self.table, &solution.plan)?)
        } else {
            None
        };
        let work = crate::pcenter::subsets(self.net.num_facilities(), p)
            .saturating_mul(self.periods.len() as u128 * self.net.num_customers() as u128);
        let exact_reference = if work <= REFERENCE_WORK_BUDGET {
            Some(self.exact(p, 0)?.value)
        } else {
            None
        };
        let exact_gain = match exact_reference {
            Some(r) => Some(metrics(solution.objective, lower_bound, r)?.gain),
            None => None,
        };
        Ok(SolveReport {
            solution,
            lower_bound,
            reference,
            gap,
            gain,
            exact_reference,
            exact_gain,
            plan_value,
            certificate,
            timings,
        })
    }
}

/// Convenience wrapper: heuristic solve with metrics and certificate.
pub fn solve(net: &TDNetwork, p: usize, k: usize) -> Result<SolveReport, SolverError> {
    Solver::new(net)?.solve(p, k, true)
}

pub fn lower_bound(net: &TDNetwork, p: usize) -> Result<f64, SolverError> {
    Solver::new(net)?.lower_bound(p)
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub value: f64,
    pub solution: MultiPeriodSolution,
}

/// Exhaustive optimum over every plan with `k` relocation instants and every
/// facility set in every macro-period. Period costs are summed in period
/// order, the same way solution objectives are, so comparisons with the
/// heuristic are exact.
pub fn exact_small(net: &TDNetwork, p: usize, k: usize) -> Result<ExactSolution, SolverError> {
    Solver::new(net)?.exact(p, k)
}

impl Solver<'_> {
    /// [`exact_small`] on the cached period matrices.
    pub fn exact(&self, p: usize, k: usize) -> Result<ExactSolution, SolverError> {
        self.check(p, k)?;
        let m = self.num_instants();
        let nf = self.net.num_facilities();
        let count = crate::pcenter::subsets(nf, p)
            .checked_pow(k as u32 + 1)
            .and_then(|c| c.checked_mul(crate::pcenter::subsets(m, k)))
            .unwrap_or(u128::MAX);
        if count > EXACT_BUDGET {
            return Err(SolverError::BudgetExceeded { count });
        }
        let sets: Vec<Vec<usize>> = (0..nf).combinations(p).collect();
        // cost[l][s]: closest-assignment radius of set s in period l
        let cost: Vec<Vec<f64>> = self
            .periods
            .iter()
            .map(|d| sets.iter().map(|s| d.bottleneck(s)).collect())
            .collect();

        let mut best: Option<(f64, RelocationPlan, Vec<usize>)> = None;
        for nodes in (1..=m).combinations(k) {
            let plan = RelocationPlan::new(nodes, m)?;
            let block_of = plan.block_of_period();
            let mut choice = vec![0usize; k + 1];
            loop {
                let total = block_of
                    .iter()
                    .enumerate()
                    .map(|(l, &b)| cost[l][choice[b]])
                    .sum::<f64>();
                if best.as_ref().is_none_or(|(v, _, _)| total < *v) {
                    best = Some((total, plan.clone(), choice.clone()));
                }
                // odometer over per-block set indices, last block fastest
                let mut pos = k + 1;
                while pos > 0 {
                    pos -= 1;
                    choice[pos] += 1;
                    if choice[pos] < sets.len() {
                        break;
                    }
                    choice[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
        }
        let (value, plan, choice) = best.expect("at least one plan");
        let block_sets: Vec<LocationDecision> = choice
            .iter()
            .map(|&s| LocationDecision::new(sets[s].clone()))
            .collect::<Result<_, _>>()?;
        let solution = MultiPeriodSolution::assemble(&self.periods, plan, &block_sets);
        debug_assert_eq!(solution.objective, value);
        Ok(ExactSolution { value, solution })
    }
}
