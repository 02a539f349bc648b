//! Post-processing of recorded trajectories and ensembles.
//!
//! Everything here works on the recorded (possibly strided) grid. Choose the
//! stride so that `stride * dt <= 0.1 / max rate`; trapezoidal averages on a
//! grid that does not resolve the dynamics are meaningless.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{SimulationConfig, Trajectory};
use crate::model::{Compartment, EpidemicState};
use crate::regime_chain::{occupancy, StationaryDistribution};
use crate::thresholds::{PersistenceBounds, ThresholdReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("averaging window [{t0}, {t1}] is empty or outside the recorded range [0, {end}]")]
    EmptyWindow { t0: f64, t1: f64, end: f64 },
    #[error("{compartment} has non-positive value {value} at t = {t}")]
    NonPositiveValues {
        compartment: Compartment,
        t: f64,
        value: f64,
    },
    #[error("need at least two samples in the window, found {0}")]
    TooFewSamples(usize),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("trajectory {index} was produced with a different configuration")]
    InconsistentConfigs { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn lerp(t: f64, (t0, y0): (f64, f64), (t1, y1): (f64, f64)) -> f64 {
    if t1 == t0 {
        y0
    } else {
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }
}

/// Trapezoidal time average of `f(state)` over `[t0, t1]`, interpolating
/// linearly at the window edges.
pub fn time_average_by(
    traj: &Trajectory,
    f: impl Fn(&EpidemicState) -> f64,
    window: (f64, f64),
) -> Result<f64, AnalysisError> {
    let (t0, t1) = window;
    let end = traj.horizon();
    if !(t0 < t1) || t0 < 0.0 || t1 > end * (1.0 + 1e-12) {
        return Err(AnalysisError::EmptyWindow { t0, t1, end });
    }
    let t1 = t1.min(end);
    let pts: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, f(&s.state))).collect();
    let mut integral = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let lo = a.0.max(t0);
        let hi = b.0.min(t1);
        if hi <= lo {
            continue;
        }
        let ya = lerp(lo, a, b);
        let yb = lerp(hi, a, b);
        integral += 0.5 * (ya + yb) * (hi - lo);
    }
    Ok(integral / (t1 - t0))
}

pub fn time_average(
    traj: &Trajectory,
    compartment: Compartment,
    window: (f64, f64),
) -> Result<f64, AnalysisError> {
    time_average_by(traj, |s| s.get(compartment), window)
}

/// Window covering the final `fraction` of the recorded horizon.
pub fn tail_window(traj: &Trajectory, fraction: f64) -> (f64, f64) {
    let end = traj.horizon();
    (end * (1.0 - fraction), end)
}

/// True iff E, Q and I all stay below `threshold` over the final
/// `tail_fraction` of the horizon.
pub fn detect_extinction(traj: &Trajectory, threshold: f64, tail_fraction: f64) -> bool {
    let (start, _) = tail_window(traj, tail_fraction);
    traj.samples
        .iter()
        .filter(|s| s.t >= start)
        .all(|s| s.state.e.max(s.state.q).max(s.state.i) < threshold)
}

/// Least-squares slope of `ln x(t)` over the samples in `window`.
pub fn exponential_rate_estimate(
    traj: &Trajectory,
    compartment: Compartment,
    window: (f64, f64),
) -> Result<f64, AnalysisError> {
    let (t0, t1) = window;
    let mut pts = Vec::new();
    for s in traj.samples.iter().filter(|s| s.t >= t0 && s.t <= t1) {
        let v = s.state.get(compartment);
        if !(v > 0.0) {
            return Err(AnalysisError::NonPositiveValues {
                compartment,
                t: s.t,
                value: v,
            });
        }
        pts.push((s.t, v.ln()));
    }
    if pts.len() < 2 {
        return Err(AnalysisError::TooFewSamples(pts.len()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Ok(sxy / sxx)
}

/// Knobs for [`summarize_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Tail fraction used by the extinction test.
    pub extinction_tail_fraction: f64,
    pub extinction_threshold: f64,
    /// Averages are taken over the final `average_tail_fraction` of the horizon.
    pub average_tail_fraction: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            extinction_tail_fraction: 0.1,
            extinction_threshold: 1e-3,
            average_tail_fraction: 0.5,
        }
    }
}

/// Flags set when an ensemble-mean tail average falls below the
/// corresponding persistence lower bound. The bounds are asymptotic, so a
/// flag is informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundViolations {
    #[serde(rename = "E")]
    pub e: bool,
    #[serde(rename = "Q")]
    pub q: bool,
    #[serde(rename = "I")]
    pub i: bool,
}

impl BoundViolations {
    pub fn check(means: &EpidemicState, bounds: &PersistenceBounds) -> Self {
        Self {
            e: means.e < bounds.e,
            q: means.q < bounds.q,
            i: means.i < bounds.i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub average_window: (f64, f64),
    pub tail_mean: EpidemicState,
    pub tail_sd: EpidemicState,
    pub extinction_fraction: f64,
    pub extinction_threshold: f64,
    pub extinction_tail_fraction: f64,
    pub mean_occupancy: Vec<f64>,
    /// L1 distance of `mean_occupancy` to the stationary law.
    pub occupancy_l1: f64,
    pub clamp_events: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound_violations: Option<BoundViolations>,
}

fn same_setup(a: &SimulationConfig, b: &SimulationConfig) -> bool {
    a.clone().with_seed(0) == b.clone().with_seed(0)
}

fn occupancy_of(traj: &Trajectory, n_states: usize) -> Vec<f64> {
    match &traj.regime_path {
        Some(path) => occupancy(path),
        None => {
            let mut v = vec![0.0; n_states];
            v[traj.first().regime] = 1.0;
            v
        }
    }
}

/// Aggregates per-trajectory statistics over an ensemble that shares one
/// setup (all configuration fields except the seed must agree).
pub fn summarize_ensemble(
    trajectories: &[Trajectory],
    pi: &StationaryDistribution,
    report: &ThresholdReport,
    options: &SummaryOptions,
) -> Result<EnsembleSummary, AnalysisError> {
    let first = trajectories.first().ok_or(AnalysisError::EmptyEnsemble)?;
    if !(options.extinction_tail_fraction > 0.0 && options.extinction_tail_fraction <= 1.0)
        || !(options.average_tail_fraction > 0.0 && options.average_tail_fraction <= 1.0)
        || !(options.extinction_threshold > 0.0)
    {
        return Err(AnalysisError::InvalidArgument(format!("{options:?}")));
    }
    for (index, traj) in trajectories.iter().enumerate().skip(1) {
        let consistent = match (&first.meta.config, &traj.meta.config) {
            (Some(a), Some(b)) => same_setup(a, b),
            (None, None) => first.horizon() == traj.horizon(),
            _ => false,
        };
        if !consistent {
            return Err(AnalysisError::InconsistentConfigs { index });
        }
    }
    let n = trajectories.len();
    let window = tail_window(first, options.average_tail_fraction);
    let mut averages = Vec::with_capacity(n);
    let mut extinct = 0usize;
    let mut occ = vec![0.0; pi.len()];
    let mut clamp_events = 0;
    for traj in trajectories {
        let avg: Vec<f64> = Compartment::ALL
            .iter()
            .map(|&c| time_average(traj, c, window))
            .collect::<Result<_, _>>()?;
        averages.push(avg);
        if detect_extinction(
            traj,
            options.extinction_threshold,
            options.extinction_tail_fraction,
        ) {
            extinct += 1;
        }
        for (acc, v) in occ.iter_mut().zip(occupancy_of(traj, pi.len())) {
            *acc += v / n as f64;
        }
        clamp_events += traj.meta.clamp_events;
    }
    let mean: [f64; 5] =
        std::array::from_fn(|k| averages.iter().map(|a| a[k]).sum::<f64>() / n as f64);
    let sd: [f64; 5] = std::array::from_fn(|k| {
        if n < 2 {
            0.0
        } else {
            let ss: f64 = averages.iter().map(|a| (a[k] - mean[k]).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        }
    });
    let tail_mean = EpidemicState::from_array(mean);
    Ok(EnsembleSummary {
        n_trajectories: n,
        average_window: window,
        tail_mean,
        tail_sd: EpidemicState::from_array(sd),
        extinction_fraction: extinct as f64 / n as f64,
        extinction_threshold: options.extinction_threshold,
        extinction_tail_fraction: options.extinction_tail_fraction,
        occupancy_l1: pi.l1_distance(&occ),
        mean_occupancy: occ,
        clamp_events,
        bound_violations: report
            .bounds
            .as_ref()
            .map(|b| BoundViolations::check(&tail_mean, b)),
    })
}
