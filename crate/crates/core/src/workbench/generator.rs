//! Synthetic instance generator.
//!
//! Nodes are scattered uniformly in a square and every node is both a
//! facility and a customer. Each arc gets a free-flow time `base + scale *
//! euclid`; time-dependent arcs additionally get a stepwise speed profile
//! (one value per period, at most 1) shaped by congestion peaks. Travel
//! times are produced by traversing the free-flow length at that speed
//! from every horizon node and interpolating linearly, which keeps every
//! function FIFO.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instance::Instance;
use crate::igp::{igp_traverse, IgpError, SpeedProfile};
use crate::tdnet::{PiecewiseLinearTT, TDNetwork, TdNetError, TimeHorizon, DEFAULT_HORIZON_END};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Igp(#[from] IgpError),
    #[error(transparent)]
    Network(#[from] TdNetError),
}

/// A congestion peak: speeds dip towards `floor` around `center`.
///
/// The intensity is `exp(-(|t - center| / width)^sharpness)`: a Gaussian bump
/// for sharpness 2, close to a flat window of half-width `width` for large
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    pub floor: f64,
    pub sharpness: f64,
}

impl Peak {
    pub fn gaussian(center: f64, width: f64, floor: f64) -> Self {
        Self {
            center,
            width,
            floor,
            sharpness: 2.0,
        }
    }

    fn intensity(&self, t: f64) -> f64 {
        let z = ((t - self.center) / self.width).abs();
        (-z.powf(self.sharpness)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pattern {
    /// Every time-dependent arc shares the same speed profile, so the
    /// speeds factor as `u_ij * b_l` exactly.
    Common,
    /// Each peak hits a random spatial hotspot; arcs whose midpoint is near
    /// it slow down most. Distinct hotspots per peak make the arc ranking
    /// change over the day.
    Hotspot { radius: f64, noise: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub nodes: usize,
    /// Number of interior grid instants `M`.
    pub instants: usize,
    pub horizon_end: f64,
    /// Share of arcs with time-dependent travel times.
    pub td_fraction: f64,
    pub peaks: Vec<Peak>,
    pub pattern: Pattern,
    /// Free-flow time of a zero-length arc (minutes).
    pub base_time: f64,
    /// Free-flow minutes per unit of distance; nodes live in the unit square.
    pub time_scale: f64,
    pub seed: u64,
}

/// Morning and evening rush hours on a day-long horizon.
pub fn rush_hours() -> Vec<Peak> {
    vec![Peak::gaussian(480.0, 90.0, 0.3), Peak::gaussian(1050.0, 100.0, 0.3)]
}

/// Back-to-back congestion windows covering the whole horizon, separated by
/// single free-flowing periods of the uniform grid with `instants` interior
/// nodes.
pub fn rolling_windows(horizon_end: f64, instants: usize, windows: usize, floor: f64) -> Vec<Peak> {
    let periods = instants + 1;
    // r windows need r - 1 separators and at least one period each
    let r = windows.min(periods.div_ceil(2)).max(1);
    let step = horizon_end / periods as f64;
    let span = (periods - (r - 1)) as f64 / r as f64;
    (0..r)
        .map(|k| {
            let first = (k as f64 * (span + 1.0)).round();
            let last = ((k as f64 + 1.0) * span + k as f64).round();
            let (a, b) = (first * step, last * step);
            Peak {
                center: 0.5 * (a + b),
                width: 0.5 * (b - a),
                floor,
                sharpness: 60.0,
            }
        })
        .collect()
}

impl GeneratorConfig {
    /// Congestion windows covering the day, each centred on a different
    /// part of the map, so the arc ranking changes from window to window.
    pub fn crossing(nodes: usize, instants: usize, seed: u64) -> Self {
        Self {
            nodes,
            instants,
            horizon_end: DEFAULT_HORIZON_END,
            td_fraction: 0.8,
            peaks: rolling_windows(DEFAULT_HORIZON_END, instants, 4, 0.3),
            pattern: Pattern::Hotspot {
                radius: 0.35,
                noise: 0.2,
            },
            base_time: 1.0,
            time_scale: 40.0,
            seed,
        }
    }

    /// All arcs time-dependent with one network-wide rush-hour profile.
    pub fn common(nodes: usize, instants: usize, seed: u64) -> Self {
        Self {
            td_fraction: 1.0,
            peaks: rush_hours(),
            pattern: Pattern::Common,
            ..Self::crossing(nodes, instants, seed)
        }
    }

    /// Constant travel times only.
    pub fn static_times(nodes: usize, instants: usize, seed: u64) -> Self {
        Self {
            td_fraction: 0.0,
            ..Self::crossing(nodes, instants, seed)
        }
    }

    fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Config(m.to_string()));
        if self.nodes < 2 {
            return bad("need at least 2 nodes");
        }
        if self.instants < 1 {
            return bad("need at least 1 grid instant");
        }
        if !(0.0..=1.0).contains(&self.td_fraction) {
            return bad("td_fraction must lie in [0, 1]");
        }
        if !(self.horizon_end > 0.0 && self.horizon_end.is_finite()) {
            return bad("horizon end must be positive");
        }
        if !(self.base_time > 0.0) || !(self.time_scale >= 0.0) {
            return bad("base_time must be positive and time_scale non-negative");
        }
        for p in &self.peaks {
            if !(p.width > 0.0) || !(p.floor > 0.0 && p.floor <= 1.0) || !(p.sharpness > 0.0) {
                return bad("peaks need a positive width and sharpness and a floor in (0, 1]");
            }
        }
        if let Pattern::Hotspot { radius, noise } = self.pattern {
            if !(radius > 0.0) || !(0.0..1.0).contains(&noise) {
                return bad("hotspot radius must be positive and noise in [0, 1)");
            }
        }
        Ok(())
    }
}

type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let horizon = TimeHorizon::uniform(0.0, config.horizon_end, config.instants)?;
    let mids: Vec<f64> = (0..horizon.num_periods())
        .map(|l| {
            let (a, b) = horizon.period(l);
            0.5 * (a + b)
        })
        .collect();

    let points: Vec<Point> = (0..config.nodes).map(|_| (rng.gen(), rng.gen())).collect();
    let hotspots: Vec<Point> = config.peaks.iter().map(|_| (rng.gen(), rng.gen())).collect();
    let common: Vec<f64> = mids
        .iter()
        .map(|&t| {
            config
                .peaks
                .iter()
                .map(|p| 1.0 - (1.0 - p.floor) * p.intensity(t))
                .fold(1.0, f64::min)
        })
        .collect();

    let n = config.nodes;
    let mut arcs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let length = config.base_time + config.time_scale * dist(points[i], points[j]);
            let td = rng.gen::<f64>() < config.td_fraction;
            let arc = if !td {
                PiecewiseLinearTT::constant(length, horizon.start(), horizon.end())?
            } else {
                let speeds = match config.pattern {
                    Pattern::Common => common.clone(),
                    Pattern::Hotspot { radius, noise } => {
                        let mid = (0.5 * (points[i].0 + points[j].0), 0.5 * (points[i].1 + points[j].1));
                        let exposure: Vec<f64> = hotspots
                            .iter()
                            .map(|&h| {
                                let z = dist(mid, h) / radius;
                                ((-z * z).exp() * (1.0 + noise * rng.gen_range(-1.0..1.0))).clamp(0.0, 1.0)
                            })
                            .collect();
                        mids.iter()
                            .map(|&t| {
                                config
                                    .peaks
                                    .iter()
                                    .zip(&exposure)
                                    .map(|(p, e)| 1.0 - (1.0 - p.floor) * p.intensity(t) * e)
                                    .fold(1.0, f64::min)
                            })
                            .collect()
                    }
                };
                let profile = SpeedProfile::new(length, speeds)?;
                let points = horizon
                    .nodes()
                    .iter()
                    .map(|&t| Ok((t, igp_traverse(&profile, &horizon, t)?)))
                    .collect::<Result<Vec<_>, IgpError>>()?;
                PiecewiseLinearTT::new(points)?.simplified()
            };
            arcs.push(arc);
        }
    }
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let network = TDNetwork::new(ids.clone(), ids, arcs, horizon)?;
    Ok(Instance {
        name: format!("n{}-m{}-s{}", config.nodes, config.instants, config.seed),
        seed: Some(config.seed),
        network,
    })
}
