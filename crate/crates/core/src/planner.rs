//! Selection of relocation instants.
//!
//! Nodes `0..=M+1` of a DAG stand for the horizon nodes `t_0..t_{M+1}`; an
//! arc `h -> l` is a macro-period covering periods `h..l` and carries the
//! gain `c[h][l]`, the smallest full-horizon degradation seen on any arc in
//! any of those periods. Choosing `K` relocation instants is a longest
//! source-to-sink path with exactly `K + 1` arcs, solved exactly by DP.

use std::ops::Range;

use itertools::Itertools;
use thiserror::Error;

use crate::igp::{self, check_ranking_invariance, derive_all, factorize, Factorization, IgpError, RankingCheck};
use crate::pcenter::{subsets, BRUTE_FORCE_BUDGET};
use crate::tdnet::{TDNetwork, TdNetError, TimeHorizon, WorstTimeTable};

/// Plans whose objectives differ by at most this much count as tied.
pub const GAIN_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("K = {k} relocations requested but only {m} candidate instants exist")]
    TooManyRelocations { k: usize, m: usize },
    #[error("relocation nodes must be strictly increasing within 1..={m}")]
    BadInstants { m: usize },
    #[error("exhaustive enumeration of {count} plans exceeds the budget")]
    BudgetExceeded { count: u128 },
    #[error("gain table needs at least one period")]
    Empty,
    #[error(transparent)]
    Igp(#[from] IgpError),
    #[error(transparent)]
    Network(#[from] TdNetError),
}

/// Relocation instants `T_R`, stored as horizon node indices in `1..=M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelocationPlan {
    nodes: Vec<usize>,
    num_instants: usize,
}

impl RelocationPlan {
    pub fn new(nodes: Vec<usize>, num_instants: usize) -> Result<Self, PlannerError> {
        let ok = nodes.iter().all(|&n| (1..=num_instants).contains(&n)) && nodes.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(PlannerError::BadInstants { m: num_instants });
        }
        Ok(Self { nodes, num_instants })
    }

    /// No relocation: one macro-period.
    pub fn none(num_instants: usize) -> Self {
        Self {
            nodes: Vec::new(),
            num_instants,
        }
    }

    /// Relocation at every candidate instant.
    pub fn all(num_instants: usize) -> Self {
        Self {
            nodes: (1..=num_instants).collect(),
            num_instants,
        }
    }

    /// Node indices of the relocation instants.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of relocations `K`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_instants(&self) -> usize {
        self.num_instants
    }

    pub fn num_periods(&self) -> usize {
        self.num_instants + 1
    }

    /// Relocation times on `horizon`.
    pub fn instants(&self, horizon: &TimeHorizon) -> Vec<f64> {
        self.nodes.iter().map(|&n| horizon.nodes()[n]).collect()
    }

    /// Period ranges of the `K + 1` macro-periods.
    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        std::iter::once(0)
            .chain(self.nodes.iter().copied())
            .chain(std::iter::once(self.num_periods()))
            .tuple_windows()
            .map(|(a, b)| a..b)
    }

    /// Macro-period time intervals on `horizon`.
    pub fn macro_periods(&self, horizon: &TimeHorizon) -> Vec<(f64, f64)> {
        self.blocks()
            .map(|r| (horizon.nodes()[r.start], horizon.nodes()[r.end]))
            .collect()
    }

    /// Macro-period index of every period.
    pub fn block_of_period(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_periods());
        for (k, r) in self.blocks().enumerate() {
            out.extend(r.map(|_| k));
        }
        out
    }
}

/// Gains `c[h][l]` for every node pair `h < l` of `0..=M+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDAG {
    num_nodes: usize,
    gains: Vec<f64>,
}

impl GainDAG {
    /// Gains from per-period minimum degradations: `c[h][l] = min(m[h..l])`.
    pub fn from_period_minima(minima: &[f64]) -> Result<Self, PlannerError> {
        if minima.is_empty() {
            return Err(PlannerError::Empty);
        }
        let n = minima.len() + 1;
        let mut gains = vec![f64::NAN; n * n];
        for h in 0..n - 1 {
            let mut running = f64::INFINITY;
            for l in h + 1..n {
                running = running.min(minima[l - 1]);
                gains[h * n + l] = running;
            }
        }
        Ok(Self { num_nodes: n, gains })
    }

    /// Arbitrary gains; `gain(h, l)` is queried for every `h < l < num_nodes`.
    pub fn from_fn(num_nodes: usize, mut gain: impl FnMut(usize, usize) -> f64) -> Result<Self, PlannerError> {
        if num_nodes < 2 {
            return Err(PlannerError::Empty);
        }
        let mut gains = vec![f64::NAN; num_nodes * num_nodes];
        for h in 0..num_nodes {
            for l in h + 1..num_nodes {
                gains[h * num_nodes + l] = gain(h, l);
            }
        }
        Ok(Self { num_nodes, gains })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of candidate instants `M` (interior nodes).
    pub fn num_instants(&self) -> usize {
        self.num_nodes - 2
    }

    pub fn gain(&self, h: usize, l: usize) -> f64 {
        debug_assert!(h < l && l < self.num_nodes);
        self.gains[h * self.num_nodes + l]
    }

    /// Objective of a plan: gains summed from the sink backwards.
    pub fn plan_value(&self, plan: &RelocationPlan) -> f64 {
        let path: Vec<usize> = std::iter::once(0)
            .chain(plan.nodes().iter().copied())
            .chain(std::iter::once(self.num_nodes - 1))
            .collect();
        path.windows(2).rev().fold(0.0, |acc, w| self.gain(w[0], w[1]) + acc)
    }
}

/// Gain DAG over the full horizon from a factorization.
pub fn build_gain_dag(fact: &Factorization) -> Result<GainDAG, PlannerError> {
    GainDAG::from_period_minima(&fact.period_minima())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub plan: RelocationPlan,
    pub value: f64,
}

/// Best source-to-sink path with exactly `k + 1` arcs. Among plans within
/// [`GAIN_TIE_TOL`] of the optimum, the lexicographically earliest wins.
pub fn select_relocations(dag: &GainDAG, k: usize) -> Result<Selection, PlannerError> {
    let m = dag.num_instants();
    if k > m {
        return Err(PlannerError::TooManyRelocations { k, m });
    }
    let n = dag.num_nodes();
    let sink = n - 1;
    // best[a][x]: best value from node x to the sink with exactly a arcs
    let mut best = vec![vec![f64::NEG_INFINITY; n]; k + 2];
    best[0][sink] = 0.0;
    for arcs in 1..=k + 1 {
        for x in 0..sink {
            let v = (x + 1..n)
                .filter(|&y| best[arcs - 1][y] > f64::NEG_INFINITY)
                .map(|y| dag.gain(x, y) + best[arcs - 1][y])
                .fold(f64::NEG_INFINITY, f64::max);
            best[arcs][x] = v;
        }
    }
    let target = best[k + 1][0];
    let mut nodes = Vec::with_capacity(k);
    let mut at = 0;
    let mut collected = 0.0;
    for arcs in (1..=k + 1).rev() {
        let next = (at + 1..n)
            .find(|&y| {
                best[arcs - 1][y] > f64::NEG_INFINITY
                    && collected + dag.gain(at, y) + best[arcs - 1][y] >= target - GAIN_TIE_TOL
            })
            .expect("a feasible continuation exists");
        collected += dag.gain(at, next);
        at = next;
        if next != sink {
            nodes.push(next);
        }
    }
    let plan = RelocationPlan::new(nodes, m)?;
    let value = dag.plan_value(&plan);
    Ok(Selection { plan, value })
}

/// Exhaustive selection over all `C(M, K)` plans, same tie rule.
pub fn brute_force_selection(dag: &GainDAG, k: usize) -> Result<Selection, PlannerError> {
    let m = dag.num_instants();
    if k > m {
        return Err(PlannerError::TooManyRelocations { k, m });
    }
    let count = subsets(m, k);
    if count > BRUTE_FORCE_BUDGET {
        return Err(PlannerError::BudgetExceeded { count });
    }
    let plans: Vec<(RelocationPlan, f64)> = (1..=m)
        .combinations(k)
        .map(|c| {
            let plan = RelocationPlan {
                nodes: c,
                num_instants: m,
            };
            let v = dag.plan_value(&plan);
            (plan, v)
        })
        .collect();
    let top = plans.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let (plan, value) = plans
        .into_iter()
        .find(|(_, v)| *v >= top - GAIN_TIE_TOL)
        .expect("at least one plan");
    Ok(Selection { plan, value })
}

/// Optimality certificate of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCertificate {
    /// `Delta_k` re-derived on each macro-period.
    pub block_deltas: Vec<f64>,
    /// `min_k Delta_k`.
    pub delta: f64,
    /// Ranking-invariance outcome per macro-period.
    pub rankings: Vec<RankingCheck>,
    /// Every macro-period is ranking invariant, so the two-phase solution
    /// is optimal.
    pub optimal: bool,
}

/// Re-derives the speed model on every macro-period and checks arc ranking
/// invariance inside each of them.
pub fn certify_plan(
    net: &TDNetwork,
    table: &WorstTimeTable,
    plan: &RelocationPlan,
) -> Result<PlanCertificate, PlannerError> {
    let horizon = net.horizon();
    if plan.num_periods() != horizon.num_periods() {
        return Err(PlannerError::BadInstants {
            m: horizon.num_instants(),
        });
    }
    let mut block_deltas = Vec::new();
    let mut rankings = Vec::new();
    for block in plan.blocks() {
        let sub = horizon.sub_horizon(block.clone())?;
        let fact = factorize(&derive_all(net.arcs(), &sub)?)?;
        block_deltas.push(fact.big_delta);
        let periods: Vec<usize> = block.collect();
        rankings.push(check_ranking_invariance(table, &periods));
    }
    let delta = block_deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let optimal = rankings.iter().all(RankingCheck::is_invariant);
    Ok(PlanCertificate {
        block_deltas,
        delta,
        rankings,
        optimal,
    })
}

/// Full-horizon factorization of every arc of `net`.
pub fn full_horizon_factorization(net: &TDNetwork) -> Result<Factorization, PlannerError> {
    Ok(igp::factorize(&derive_all(net.arcs(), net.horizon())?)?)
}
