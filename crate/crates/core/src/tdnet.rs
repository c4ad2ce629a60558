//! Time-dependent service network: horizon grid, piecewise-linear FIFO
//! travel-time functions and the per-period worst service times derived
//! from them.
//!
//! The horizon `[start, end]` is cut by `M` candidate relocation instants
//! into `M + 1` closed periods `[t_l, t_{l+1}]`. All travel-time breakpoints
//! sit on the nodes `t_0 = start, t_1, ..., t_M, t_{M+1} = end`, which keeps
//! the worst time of any union of consecutive periods equal to the maximum
//! of the per-period worst times.

use std::ops::Range;

use thiserror::Error;

/// Absolute tolerance (minutes) used when matching breakpoints to nodes and
/// when checking that an instant lies inside a domain.
pub const TIME_EPS: f64 = 1e-9;

/// Slack on the FIFO slope bound `slope >= -1`.
pub const FIFO_TOL: f64 = 1e-9;

/// Default horizon length: one day, in minutes.
pub const DEFAULT_HORIZON_END: f64 = 1440.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdNetError {
    #[error("instant {t} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("empty or inverted interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("malformed travel-time function: {0}")]
    MalformedFunction(String),
    #[error("malformed horizon: {0}")]
    MalformedHorizon(String),
    #[error("arc ({facility}, {customer}): breakpoint at t = {t} is not a horizon node")]
    MisalignedBreakpoint { facility: usize, customer: usize, t: f64 },
    #[error("arc ({facility}, {customer}): function does not span the horizon")]
    HorizonMismatch { facility: usize, customer: usize },
    #[error("arc ({facility}, {customer}) violates FIFO on segment {segment} (slope {slope})")]
    FifoViolation {
        facility: usize,
        customer: usize,
        segment: usize,
        slope: f64,
    },
    #[error("missing arc ({facility}, {customer})")]
    MissingArc { facility: usize, customer: usize },
    #[error("duplicate arc ({facility}, {customer})")]
    DuplicateArc { facility: usize, customer: usize },
    #[error("arc ({facility}, {customer}) refers to an unknown node")]
    UnknownNode { facility: usize, customer: usize },
    #[error("empty period range {start}..{end}")]
    EmptyRange { start: usize, end: usize },
    #[error("network needs at least one facility and one customer")]
    EmptyNetwork,
}

/// Planning horizon together with its candidate relocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeHorizon {
    // t_0 = start, t_1..t_M = grid, t_{M+1} = end
    nodes: Vec<f64>,
}

impl TimeHorizon {
    pub fn new(start: f64, end: f64, grid: Vec<f64>) -> Result<Self, TdNetError> {
        if !(start.is_finite() && end.is_finite()) || start >= end {
            return Err(TdNetError::MalformedHorizon(format!(
                "need finite start < end, got [{start}, {end}]"
            )));
        }
        let mut nodes = Vec::with_capacity(grid.len() + 2);
        nodes.push(start);
        for &t in &grid {
            let prev = *nodes.last().unwrap();
            if !t.is_finite() || t <= prev || t >= end {
                return Err(TdNetError::MalformedHorizon(format!(
                    "grid instant {t} must be strictly increasing inside ({start}, {end})"
                )));
            }
            nodes.push(t);
        }
        nodes.push(end);
        Ok(Self { nodes })
    }

    /// Horizon `[start, end]` with `m` equally spaced relocation instants.
    pub fn uniform(start: f64, end: f64, m: usize) -> Result<Self, TdNetError> {
        let step = (end - start) / (m as f64 + 1.0);
        let grid = (1..=m).map(|l| start + step * l as f64).collect();
        Self::new(start, end, grid)
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// The `M` candidate relocation instants `t_1..t_M`.
    pub fn grid(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// All nodes `t_0..t_{M+1}`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of candidate relocation instants `M`.
    pub fn num_instants(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Number of periods `M + 1`.
    pub fn num_periods(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Closed period `I_l = [t_l, t_{l+1}]`.
    pub fn period(&self, l: usize) -> (f64, f64) {
        (self.nodes[l], self.nodes[l + 1])
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() - TIME_EPS && t <= self.end() + TIME_EPS
    }

    /// Index of the node equal to `t` (within [`TIME_EPS`]), if any.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let k = self.nodes.partition_point(|&x| x < t - TIME_EPS);
        (k < self.nodes.len() && (self.nodes[k] - t).abs() <= TIME_EPS).then_some(k)
    }

    /// Period containing `t`; the shared endpoint `t_l` is attributed to
    /// period `l`, and `end` to the last period.
    pub fn period_of(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.num_periods() - 1)
    }

    /// Sub-horizon spanning periods `range` (so nodes `range.start..=range.end`).
    pub fn sub_horizon(&self, range: Range<usize>) -> Result<Self, TdNetError> {
        if range.start >= range.end || range.end > self.num_periods() {
            return Err(TdNetError::EmptyRange {
                start: range.start,
                end: range.end,
            });
        }
        Ok(Self {
            nodes: self.nodes[range.start..=range.end].to_vec(),
        })
    }
}

/// Continuous piecewise-linear travel time `tau(t)` given by its breakpoints.
///
/// A single breakpoint encodes a constant function defined everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearTT {
    points: Vec<(f64, f64)>,
}

/// Outcome of [`check_fifo`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FifoCheck {
    Satisfied,
    Violated { segment: usize, slope: f64 },
}

impl FifoCheck {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, FifoCheck::Satisfied)
    }
}

impl PiecewiseLinearTT {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, TdNetError> {
        if points.is_empty() {
            return Err(TdNetError::MalformedFunction("no breakpoints".into()));
        }
        for (k, &(t, d)) in points.iter().enumerate() {
            if !t.is_finite() || !d.is_finite() {
                return Err(TdNetError::MalformedFunction(format!("non-finite breakpoint {k}")));
            }
            if d <= 0.0 {
                return Err(TdNetError::MalformedFunction(format!(
                    "duration {d} at breakpoint {k} is not strictly positive"
                )));
            }
            if k > 0 && t <= points[k - 1].0 {
                return Err(TdNetError::MalformedFunction(format!(
                    "breakpoint abscissae not strictly increasing at {k}"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Constant function spanning `[start, end]`.
    pub fn constant(value: f64, start: f64, end: f64) -> Result<Self, TdNetError> {
        Self::new(vec![(start, value), (end, value)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_constant(&self) -> bool {
        self.points.iter().all(|&(_, d)| d == self.points[0].1)
    }

    /// Domain of definition; unbounded for a single-breakpoint function.
    pub fn domain(&self) -> (f64, f64) {
        if self.points.len() == 1 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (self.points[0].0, self.points[self.points.len() - 1].0)
        }
    }

    fn check_in_domain(&self, t: f64) -> Result<f64, TdNetError> {
        let (lo, hi) = self.domain();
        if t.is_nan() || t < lo - TIME_EPS || t > hi + TIME_EPS {
            return Err(TdNetError::OutOfDomain { t, lo, hi });
        }
        Ok(t.clamp(lo, hi))
    }

    /// `tau(t)` by linear interpolation; exact at breakpoints.
    pub fn evaluate(&self, t: f64) -> Result<f64, TdNetError> {
        let t = self.check_in_domain(t)?;
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        let pts = &self.points;
        let k = pts.partition_point(|&(x, _)| x <= t);
        if k == 0 {
            return pts[0].1;
        }
        if k == pts.len() {
            return pts[k - 1].1;
        }
        let (x0, y0) = pts[k - 1];
        if x0 == t {
            return y0;
        }
        let (x1, y1) = pts[k];
        y0 + (t - x0) / (x1 - x0) * (y1 - y0)
    }

    /// Slope of every segment, in order.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
    }

    /// Exact maximum of `tau` over `[a, b]`.
    pub fn worst_on(&self, a: f64, b: f64) -> Result<f64, TdNetError> {
        if !(a <= b) {
            return Err(TdNetError::BadInterval { a, b });
        }
        let a = self.check_in_domain(a)?;
        let b = self.check_in_domain(b)?;
        let mut worst = self.eval_unchecked(a).max(self.eval_unchecked(b));
        let lo = self.points.partition_point(|&(x, _)| x <= a);
        for &(x, d) in &self.points[lo..] {
            if x >= b {
                break;
            }
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Drops interior breakpoints sitting in the middle of a flat stretch.
    pub fn simplified(&self) -> Self {
        if self.points.len() <= 2 {
            return self.clone();
        }
        let mut out = vec![self.points[0]];
        for w in self.points.windows(3) {
            if !(w[0].1 == w[1].1 && w[1].1 == w[2].1) {
                out.push(w[1]);
            }
        }
        out.push(*self.points.last().unwrap());
        Self { points: out }
    }
}

/// `tau(t)` by linear interpolation between breakpoints.
pub fn evaluate_tt(f: &PiecewiseLinearTT, t: f64) -> Result<f64, TdNetError> {
    f.evaluate(t)
}

/// FIFO holds iff every segment slope is at least `-1` (up to [`FIFO_TOL`]).
pub fn check_fifo(f: &PiecewiseLinearTT) -> FifoCheck {
    match f.slopes().enumerate().find(|&(_, s)| s < -1.0 - FIFO_TOL) {
        Some((segment, slope)) => FifoCheck::Violated { segment, slope },
        None => FifoCheck::Satisfied,
    }
}

/// `d(I) = max_{t in I} tau(t)` for `I = [a, b]`.
pub fn worst_service_time(f: &PiecewiseLinearTT, a: f64, b: f64) -> Result<f64, TdNetError> {
    f.worst_on(a, b)
}

/// A service arc from facility `facility` to customer `customer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArcId {
    pub facility: usize,
    pub customer: usize,
}

/// Complete bipartite facility-to-customer network with time-dependent
/// arc travel times.
#[derive(Debug, Clone, PartialEq)]
pub struct TDNetwork {
    facilities: Vec<String>,
    customers: Vec<String>,
    // row-major: facility * |C| + customer
    arcs: Vec<PiecewiseLinearTT>,
    horizon: TimeHorizon,
}

impl TDNetwork {
    /// Builds a network from a row-major arc list (`facility * |C| + customer`).
    pub fn new(
        facilities: Vec<String>,
        customers: Vec<String>,
        arcs: Vec<PiecewiseLinearTT>,
        horizon: TimeHorizon,
    ) -> Result<Self, TdNetError> {
        if facilities.is_empty() || customers.is_empty() {
            return Err(TdNetError::EmptyNetwork);
        }
        let nc = customers.len();
        if arcs.len() != facilities.len() * nc {
            let k = arcs.len().min(facilities.len() * nc);
            return Err(TdNetError::MissingArc {
                facility: k / nc,
                customer: k % nc,
            });
        }
        let arcs = arcs
            .into_iter()
            .enumerate()
            .map(|(k, f)| align_to_horizon(f, &horizon, k / nc, k % nc))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            facilities,
            customers,
            arcs,
            horizon,
        })
    }

    /// Builds a network from an unordered collection of arcs; every
    /// `(facility, customer)` pair must appear exactly once.
    pub fn from_arcs(
        facilities: Vec<String>,
        customers: Vec<String>,
        horizon: TimeHorizon,
        arcs: impl IntoIterator<Item = (ArcId, PiecewiseLinearTT)>,
    ) -> Result<Self, TdNetError> {
        let (nf, nc) = (facilities.len(), customers.len());
        let mut slots: Vec<Option<PiecewiseLinearTT>> = vec![None; nf * nc];
        for (id, f) in arcs {
            if id.facility >= nf || id.customer >= nc {
                return Err(TdNetError::UnknownNode {
                    facility: id.facility,
                    customer: id.customer,
                });
            }
            let slot = &mut slots[id.facility * nc + id.customer];
            if slot.is_some() {
                return Err(TdNetError::DuplicateArc {
                    facility: id.facility,
                    customer: id.customer,
                });
            }
            *slot = Some(f);
        }
        let mut out = Vec::with_capacity(slots.len());
        for (k, s) in slots.into_iter().enumerate() {
            out.push(s.ok_or(TdNetError::MissingArc {
                facility: k / nc,
                customer: k % nc,
            })?);
        }
        Self::new(facilities, customers, out, horizon)
    }

    pub fn facilities(&self) -> &[String] {
        &self.facilities
    }

    pub fn customers(&self) -> &[String] {
        &self.customers
    }

    pub fn num_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn num_customers(&self) -> usize {
        self.customers.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn horizon(&self) -> &TimeHorizon {
        &self.horizon
    }

    pub fn arc_index(&self, id: ArcId) -> usize {
        id.facility * self.customers.len() + id.customer
    }

    pub fn arc_id(&self, index: usize) -> ArcId {
        let nc = self.customers.len();
        ArcId {
            facility: index / nc,
            customer: index % nc,
        }
    }

    pub fn arc(&self, id: ArcId) -> &PiecewiseLinearTT {
        &self.arcs[self.arc_index(id)]
    }

    /// All arc functions in row-major order.
    pub fn arcs(&self) -> &[PiecewiseLinearTT] {
        &self.arcs
    }
}

// Checks grid alignment, horizon coverage and FIFO; snaps breakpoints onto
// the exact node values.
fn align_to_horizon(
    f: PiecewiseLinearTT,
    horizon: &TimeHorizon,
    facility: usize,
    customer: usize,
) -> Result<PiecewiseLinearTT, TdNetError> {
    let pts = f.breakpoints();
    if pts.len() == 1 {
        return PiecewiseLinearTT::constant(pts[0].1, horizon.start(), horizon.end());
    }
    let mut snapped = Vec::with_capacity(pts.len());
    for &(t, d) in pts {
        let k = horizon
            .node_index(t)
            .ok_or(TdNetError::MisalignedBreakpoint { facility, customer, t })?;
        snapped.push((horizon.nodes()[k], d));
    }
    if snapped[0].0 != horizon.start() || snapped[snapped.len() - 1].0 != horizon.end() {
        return Err(TdNetError::HorizonMismatch { facility, customer });
    }
    let f = PiecewiseLinearTT::new(snapped)?;
    if let FifoCheck::Violated { segment, slope } = check_fifo(&f) {
        return Err(TdNetError::FifoViolation {
            facility,
            customer,
            segment,
            slope,
        });
    }
    Ok(f)
}

/// Worst service times `d_ij(I_l)` for every arc and period.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstTimeTable {
    num_facilities: usize,
    num_customers: usize,
    num_periods: usize,
    // arc-major: arc * num_periods + period
    values: Vec<f64>,
}

impl WorstTimeTable {
    /// Builds a table directly from per-arc rows (arc-major, row-major arcs).
    pub fn from_rows(num_facilities: usize, num_customers: usize, rows: Vec<Vec<f64>>) -> Result<Self, TdNetError> {
        if rows.len() != num_facilities * num_customers || rows.is_empty() {
            return Err(TdNetError::EmptyNetwork);
        }
        let num_periods = rows[0].len();
        if num_periods == 0 || rows.iter().any(|r| r.len() != num_periods) {
            return Err(TdNetError::MalformedHorizon("ragged worst-time rows".into()));
        }
        Ok(Self {
            num_facilities,
            num_customers,
            num_periods,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn num_facilities(&self) -> usize {
        self.num_facilities
    }

    pub fn num_customers(&self) -> usize {
        self.num_customers
    }

    pub fn num_arcs(&self) -> usize {
        self.num_facilities * self.num_customers
    }

    pub fn num_periods(&self) -> usize {
        self.num_periods
    }

    pub fn get(&self, arc: usize, period: usize) -> f64 {
        self.values[arc * self.num_periods + period]
    }

    /// `d_ij(I_0..I_M)` for one arc.
    pub fn row(&self, arc: usize) -> &[f64] {
        &self.values[arc * self.num_periods..(arc + 1) * self.num_periods]
    }

    /// Service-time matrix `d_ij(I_l)` of a single period, facility-major.
    pub fn period_matrix(&self, period: usize) -> Vec<f64> {
        (0..self.num_arcs()).map(|a| self.get(a, period)).collect()
    }

    /// Service-time matrix of the union of `periods`, facility-major.
    pub fn range_matrix(&self, periods: Range<usize>) -> Result<Vec<f64>, TdNetError> {
        self.check_range(&periods)?;
        Ok((0..self.num_arcs())
            .map(|a| {
                self.row(a)[periods.clone()]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect())
    }

    fn check_range(&self, periods: &Range<usize>) -> Result<(), TdNetError> {
        if periods.start >= periods.end || periods.end > self.num_periods {
            return Err(TdNetError::EmptyRange {
                start: periods.start,
                end: periods.end,
            });
        }
        Ok(())
    }
}

/// `d_ij(I_l)` for all arcs and periods.
pub fn build_worst_table(net: &TDNetwork) -> Result<WorstTimeTable, TdNetError> {
    let h = net.horizon();
    let np = h.num_periods();
    let mut values = Vec::with_capacity(net.num_arcs() * np);
    for f in net.arcs() {
        for l in 0..np {
            let (a, b) = h.period(l);
            values.push(f.worst_on(a, b)?);
        }
    }
    Ok(WorstTimeTable {
        num_facilities: net.num_facilities(),
        num_customers: net.num_customers(),
        num_periods: np,
        values,
    })
}

/// Worst time of `arc` over the macro-period made of `periods`.
pub fn macro_worst(table: &WorstTimeTable, arc: usize, periods: Range<usize>) -> Result<f64, TdNetError> {
    table.check_range(&periods)?;
    Ok(table.row(arc)[periods]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}
