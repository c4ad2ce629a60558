//! Constant-length / stepwise-speed travel-time model.
//!
//! Every arc gets a dummy length `L` traversed at a speed that is constant
//! on each horizon period. Travel times at period-start instants are
//! reproduced exactly; the per-period speeds are then factorized as
//! `v_ijl = u_ij * b_l * delta_ijl`, where `u_ij` is the arc's top speed,
//! `b_l` the lightest congestion factor of period `l` over the whole network
//! and `delta_ijl <= 1` the arc's extra degradation. `Delta = min delta`.
//! `Delta = 1` means every arc follows the same congestion pattern, which
//! in turn makes the arc ordering by worst time identical in every period.

use rayon::prelude::*;
use thiserror::Error;

use crate::planner::RelocationPlan;
use crate::tdnet::{PiecewiseLinearTT, TdNetError, TimeHorizon, WorstTimeTable};

/// Absolute tolerance (minutes) used by the arc-dominance comparisons.
pub const RANKING_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IgpError {
    #[error("dummy length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("departure {t} outside [{start}, {end}]")]
    DepartureOutOfRange { t: f64, start: f64, end: f64 },
    #[error("speed profile has {got} pieces, horizon has {expected} periods")]
    PeriodMismatch { got: usize, expected: usize },
    #[error("non-IGP-representable at tolerance: arrival plateau on period {period}")]
    NotRepresentable { period: usize },
    #[error("zero or negative speed on arc {arc}, period {period}")]
    ZeroSpeed { arc: usize, period: usize },
    #[error("no speed profiles to factorize")]
    Empty,
    #[error(transparent)]
    Network(#[from] TdNetError),
}

/// Dummy length plus one speed per horizon period. The last speed also
/// applies past the horizon end.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    pub length: f64,
    pub speeds: Vec<f64>,
}

impl SpeedProfile {
    pub fn new(length: f64, speeds: Vec<f64>) -> Result<Self, IgpError> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(IgpError::NonPositiveLength(length));
        }
        if let Some(period) = speeds.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(IgpError::ZeroSpeed { arc: 0, period });
        }
        Ok(Self { length, speeds })
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }
}

/// Travel time when departing at `depart`: the time needed to consume
/// `profile.length` at the stepwise speed.
pub fn igp_traverse(profile: &SpeedProfile, horizon: &TimeHorizon, depart: f64) -> Result<f64, IgpError> {
    if !(profile.length > 0.0) {
        return Err(IgpError::NonPositiveLength(profile.length));
    }
    if profile.speeds.len() != horizon.num_periods() {
        return Err(IgpError::PeriodMismatch {
            got: profile.speeds.len(),
            expected: horizon.num_periods(),
        });
    }
    if !horizon.contains(depart) {
        return Err(IgpError::DepartureOutOfRange {
            t: depart,
            start: horizon.start(),
            end: horizon.end(),
        });
    }
    Ok(traverse_from(profile, horizon.nodes(), depart))
}

fn traverse_from(profile: &SpeedProfile, nodes: &[f64], depart: f64) -> f64 {
    let last = profile.speeds.len() - 1;
    let mut piece = nodes.partition_point(|&x| x <= depart).saturating_sub(1).min(last);
    let mut remaining = profile.length;
    let mut now = depart;
    loop {
        let v = profile.speeds[piece];
        if piece == last {
            return now + remaining / v - depart;
        }
        let end = nodes[piece + 1];
        let capacity = v * (end - now);
        if remaining <= capacity {
            return now + remaining / v - depart;
        }
        remaining -= capacity;
        now = end;
        piece += 1;
    }
}

// Distance consumed between nodes[from] and `until` (>= nodes[from]).
fn distance_from_node(speeds: &[f64], nodes: &[f64], from: usize, until: f64) -> f64 {
    let last = speeds.len() - 1;
    let mut dist = 0.0;
    let mut piece = from;
    let mut now = nodes[from];
    while now < until {
        let end = if piece == last {
            until
        } else {
            nodes[piece + 1].min(until)
        };
        dist += speeds[piece] * (end - now);
        now = end;
        piece += 1;
    }
    dist
}

/// Derives `(L, v)` on the reference horizon so that departing at every
/// period start `t_0..t_{P-1}` reproduces `f` exactly.
///
/// Speeds are solved backwards: the last piece satisfies `v * tau = L`;
/// earlier pieces each appear in exactly one new equation once later
/// pieces are known. The result is normalized to a top speed of 1.
pub fn derive_igp(f: &PiecewiseLinearTT, reference: &TimeHorizon) -> Result<SpeedProfile, IgpError> {
    let nodes = reference.nodes();
    let periods = reference.num_periods();
    let taus = nodes[..periods]
        .iter()
        .map(|&t| f.evaluate(t))
        .collect::<Result<Vec<_>, _>>()?;
    for &(t, _) in f.breakpoints() {
        if t > reference.start() && t < reference.end() && reference.node_index(t).is_none() {
            return Err(TdNetError::MisalignedBreakpoint {
                facility: 0,
                customer: 0,
                t,
            }
            .into());
        }
    }

    let length = 1.0;
    let mut speeds = vec![0.0; periods];
    speeds[periods - 1] = length / taus[periods - 1];
    for l in (0..periods - 1).rev() {
        let arrival = nodes[l] + taus[l];
        let next_arrival = nodes[l + 1] + taus[l + 1];
        if next_arrival - arrival <= 1e-12 * next_arrival.abs().max(1.0) {
            return Err(IgpError::NotRepresentable { period: l });
        }
        let width = nodes[l + 1] - nodes[l];
        let v = if arrival <= nodes[l + 1] {
            length / taus[l]
        } else {
            (length - distance_from_node(&speeds, nodes, l + 1, arrival)) / width
        };
        if !(v > 0.0) {
            return Err(IgpError::NotRepresentable { period: l });
        }
        speeds[l] = v;
    }
    let top = speeds.iter().copied().fold(0.0, f64::max);
    speeds.iter_mut().for_each(|v| *v /= top);
    SpeedProfile::new(length / top, speeds)
}

/// `v_ijl = u_ij * b_l * delta_ijl` over all arcs and periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    num_periods: usize,
    /// Top speed per arc.
    pub u: Vec<f64>,
    /// Lightest congestion factor per period.
    pub b: Vec<f64>,
    // arc-major
    delta: Vec<f64>,
    /// Heaviest degradation over all arcs and periods.
    pub big_delta: f64,
}

impl Factorization {
    pub fn num_periods(&self) -> usize {
        self.num_periods
    }

    pub fn num_arcs(&self) -> usize {
        self.u.len()
    }

    pub fn delta(&self, arc: usize, period: usize) -> f64 {
        self.delta[arc * self.num_periods + period]
    }

    pub fn delta_row(&self, arc: usize) -> &[f64] {
        &self.delta[arc * self.num_periods..(arc + 1) * self.num_periods]
    }

    /// `u_ij * b_l * delta_ijl`.
    pub fn reconstruct(&self, arc: usize, period: usize) -> f64 {
        self.u[arc] * self.b[period] * self.delta(arc, period)
    }

    /// `min_ij delta_ijl` for every period.
    pub fn period_minima(&self) -> Vec<f64> {
        let mut mins = vec![f64::INFINITY; self.num_periods];
        for row in self.delta.chunks(self.num_periods) {
            for (m, &d) in mins.iter_mut().zip(row) {
                *m = m.min(d);
            }
        }
        mins
    }
}

/// Factorizes per-arc stepwise speeds; all profiles must have the same
/// number of pieces.
pub fn factorize(profiles: &[SpeedProfile]) -> Result<Factorization, IgpError> {
    let first = profiles.first().ok_or(IgpError::Empty)?;
    let np = first.speeds.len();
    let mut u = Vec::with_capacity(profiles.len());
    let mut ratios = Vec::with_capacity(profiles.len() * np);
    for (arc, p) in profiles.iter().enumerate() {
        if p.speeds.len() != np {
            return Err(IgpError::PeriodMismatch {
                got: p.speeds.len(),
                expected: np,
            });
        }
        if let Some(period) = p.speeds.iter().position(|&v| !(v > 0.0)) {
            return Err(IgpError::ZeroSpeed { arc, period });
        }
        let top = p.max_speed();
        u.push(top);
        ratios.extend(p.speeds.iter().map(|&v| v / top));
    }
    let mut b = vec![0.0f64; np];
    for row in ratios.chunks(np) {
        for (bl, &r) in b.iter_mut().zip(row) {
            *bl = bl.max(r);
        }
    }
    let delta: Vec<f64> = ratios
        .chunks(np)
        .flat_map(|row| row.iter().zip(&b).map(|(&r, &bl)| r / bl))
        .collect();
    let big_delta = delta.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Factorization {
        num_periods: np,
        u,
        b,
        delta,
        big_delta,
    })
}

/// Derives the speed profile of every arc on `reference`, in arc order.
pub fn derive_all(arcs: &[PiecewiseLinearTT], reference: &TimeHorizon) -> Result<Vec<SpeedProfile>, IgpError> {
    arcs.par_iter().map(|f| derive_igp(f, reference)).collect()
}

/// Result of an arc-ranking-invariance check.
#[derive(Debug, Clone, PartialEq)]
pub enum RankingCheck {
    Invariant,
    /// Arc `first` is strictly better than `second` in `period_a` and
    /// strictly worse in `period_b`.
    Crossing {
        first: usize,
        second: usize,
        period_a: usize,
        period_b: usize,
    },
}

impl RankingCheck {
    pub fn is_invariant(&self) -> bool {
        matches!(self, RankingCheck::Invariant)
    }
}

fn column_values<'a>(table: &'a WorstTimeTable, arc: usize, periods: &'a [usize]) -> impl Iterator<Item = f64> + 'a {
    periods.iter().map(move |&l| table.get(arc, l))
}

/// Checks that for every pair of arcs one dominates the other over
/// `periods`. Sorts arcs by their worst-time vectors and checks
/// componentwise order between neighbours.
pub fn check_ranking_invariance(table: &WorstTimeTable, periods: &[usize]) -> RankingCheck {
    if periods.len() <= 1 {
        return RankingCheck::Invariant;
    }
    let mut order: Vec<usize> = (0..table.num_arcs()).collect();
    order.sort_by(|&x, &y| {
        column_values(table, x, periods)
            .zip(column_values(table, y, periods))
            .map(|(a, b)| a.total_cmp(&b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    for w in order.windows(2) {
        if let Some(crossing) = crossing_of(table, periods, w[0], w[1]) {
            return crossing;
        }
    }
    RankingCheck::Invariant
}

// Some((x, y, a, b)) when x < y in period a and x > y in period b.
pub(crate) fn crossing_of(table: &WorstTimeTable, periods: &[usize], x: usize, y: usize) -> Option<RankingCheck> {
    let below = periods
        .iter()
        .find(|&&l| table.get(x, l) < table.get(y, l) - RANKING_TOL);
    let above = periods
        .iter()
        .find(|&&l| table.get(x, l) > table.get(y, l) + RANKING_TOL);
    match (below, above) {
        (Some(&a), Some(&b)) => Some(RankingCheck::Crossing {
            first: x,
            second: y,
            period_a: a,
            period_b: b,
        }),
        _ => None,
    }
}

/// Per-block minima of the full-horizon degradations for a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanDegradation {
    /// `z_k` for each macro-period.
    pub blocks: Vec<f64>,
    /// `min_k z_k`.
    pub proxy: f64,
    /// `sum_k z_k`, the quantity maximized when picking relocation instants.
    pub sum: f64,
}

pub fn delta_of_plan(fact: &Factorization, plan: &RelocationPlan) -> PlanDegradation {
    let minima = fact.period_minima();
    let blocks: Vec<f64> = plan
        .blocks()
        .map(|r| minima[r].iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let proxy = blocks.iter().copied().fold(f64::INFINITY, f64::min);
    let sum = blocks.iter().sum();
    PlanDegradation { blocks, proxy, sum }
}
