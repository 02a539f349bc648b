//! Time stepping for the regime-switching SDE and its deterministic limit.
//!
//! The regime sampled at `t_n` is frozen over the whole step `[t_n, t_n + dt)`.
//! Both `S` and `E` are driven by the same Brownian increment with opposite
//! signs, so the Milstein correction involves a single driver and needs no
//! Lévy areas:
//!
//! ```text
//! x_{n+1} = x_n + f(x_n) dt + g(x_n) dB + 1/2 (g . grad) g (x_n) (dB^2 - dt)
//! (g . grad) g = c^2 S E (E - S, S - E, 0, 0, 0),   c = sigma0 w1
//! ```

use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    deterministic_drift, diffusion, drift, w1, Compartment, EpidemicState, ModelError,
    PolicyFunction, RegimeParameterTable, RegimeParameters,
};
use crate::regime_chain::{
    grid_steps, grid_time, sample_path_discretized, sample_path_exact, ChainError, Generator,
    RegimePath,
};
use crate::seeds::{self, derive_seed, BROWNIAN_STREAM, CHAIN_STREAM};

/// Components below this are treated as genuinely negative.
pub const NEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parameter table has {table} regimes but the generator has {generator}")]
    DimensionMismatch { table: usize, generator: usize },
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error("compartment {compartment} went negative ({value:e}) at t = {t}")]
    NegativeState {
        t: f64,
        compartment: Compartment,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Milstein,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    Exact,
    #[default]
    Discretized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativityPolicy {
    #[default]
    ClampToZero,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub chain_mode: ChainMode,
    pub seed: u64,
    pub initial_state: EpidemicState,
    /// Zero-based regime index.
    pub initial_regime: usize,
    pub output_stride: usize,
    pub negativity_policy: NegativityPolicy,
}

impl SimulationConfig {
    pub fn new(initial_state: EpidemicState, initial_regime: usize, dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            scheme: Scheme::Milstein,
            chain_mode: ChainMode::Discretized,
            seed: 0,
            initial_state,
            initial_regime,
            output_stride: 1,
            negativity_policy: NegativityPolicy::ClampToZero,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_chain_mode(mut self, mode: ChainMode) -> Self {
        self.chain_mode = mode;
        self
    }

    pub fn with_negativity(mut self, policy: NegativityPolicy) -> Self {
        self.negativity_policy = policy;
        self
    }

    /// Checks `dt > 0`, `horizon >= 0`, `stride >= 1` and a non-negative
    /// finite initial state. A zero horizon is accepted and yields the
    /// initial sample only.
    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(IntegratorError::InvalidConfig(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(IntegratorError::InvalidConfig(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        if self.output_stride == 0 {
            return Err(IntegratorError::InvalidConfig(
                "output stride must be >= 1".into(),
            ));
        }
        if !self.initial_state.is_finite() || !self.initial_state.is_nonnegative() {
            return Err(IntegratorError::InvalidConfig(format!(
                "initial state must be finite and non-negative, got {:?}",
                self.initial_state
            )));
        }
        Ok(())
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Zero-based regime index.
    pub regime: usize,
    pub state: EpidemicState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    /// Stochastic runs echo their configuration; deterministic runs leave it empty.
    pub config: Option<SimulationConfig>,
    pub clamp_events: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub regime_path: Option<RegimePath>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn series(&self, c: Compartment) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s.state.get(c))
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has the initial sample")
    }

    pub fn horizon(&self) -> f64 {
        self.last().t
    }
}

/// Result of one guarded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EpidemicState,
    /// Components set to zero by the clamp policy.
    pub clamped: u32,
}

/// Euler–Maruyama update without any positivity handling.
pub fn em_raw(
    state: &EpidemicState,
    params: &RegimeParameters,
    h: &PolicyFunction,
    dt: f64,
    db: f64,
) -> [f64; 5] {
    let f = drift(state, params, h);
    let g = diffusion(state, params);
    let x = state.to_array();
    std::array::from_fn(|k| x[k] + f[k] * dt + g[k] * db)
}

/// `1/2 (g . grad) g (dB^2 - dt)` for the shared driver.
pub fn milstein_correction(
    state: &EpidemicState,
    params: &RegimeParameters,
    dt: f64,
    db: f64,
) -> [f64; 5] {
    let c = params.sigma0 * w1(params);
    let (s, e) = (state.s, state.e);
    let base = 0.5 * c * c * s * e * (db * db - dt);
    [base * (e - s), base * (s - e), 0.0, 0.0, 0.0]
}

/// Milstein update without any positivity handling.
pub fn milstein_raw(
    state: &EpidemicState,
    params: &RegimeParameters,
    h: &PolicyFunction,
    dt: f64,
    db: f64,
) -> [f64; 5] {
    let mut x = em_raw(state, params, h, dt, db);
    let corr = milstein_correction(state, params, dt, db);
    for k in 0..2 {
        x[k] += corr[k];
    }
    x
}

impl NegativityPolicy {
    /// Applies the policy at time `t` (used for error reporting).
    pub fn apply(self, x: [f64; 5], t: f64) -> Result<StepOutcome, IntegratorError> {
        let mut out = x;
        let mut clamped = 0;
        for (k, v) in out.iter_mut().enumerate() {
            if *v < 0.0 {
                if self == Self::Error && *v < -NEGATIVITY_TOL {
                    return Err(IntegratorError::NegativeState {
                        t,
                        compartment: Compartment::ALL[k],
                        value: *v,
                    });
                }
                *v = 0.0;
                clamped += 1;
            }
        }
        Ok(StepOutcome {
            state: EpidemicState::from_array(out),
            clamped,
        })
    }
}

pub fn em_step(
    state: &EpidemicState,
    params: &RegimeParameters,
    h: &PolicyFunction,
    dt: f64,
    db: f64,
    negativity: NegativityPolicy,
) -> Result<StepOutcome, IntegratorError> {
    negativity.apply(em_raw(state, params, h, dt, db), f64::NAN)
}

pub fn milstein_step(
    state: &EpidemicState,
    params: &RegimeParameters,
    h: &PolicyFunction,
    dt: f64,
    db: f64,
    negativity: NegativityPolicy,
) -> Result<StepOutcome, IntegratorError> {
    negativity.apply(milstein_raw(state, params, h, dt, db), f64::NAN)
}

impl Scheme {
    pub fn raw_step(
        self,
        state: &EpidemicState,
        params: &RegimeParameters,
        h: &PolicyFunction,
        dt: f64,
        db: f64,
    ) -> [f64; 5] {
        match self {
            Self::Milstein => milstein_raw(state, params, h, dt, db),
            Self::EulerMaruyama => em_raw(state, params, h, dt, db),
        }
    }
}

fn should_record(step: usize, steps: usize, stride: usize) -> bool {
    step.is_multiple_of(stride) || step == steps
}

/// Samples the regime path the configuration asks for.
pub fn sample_regime_path(
    config: &SimulationConfig,
    g: &Generator,
) -> Result<RegimePath, IntegratorError> {
    let mut rng = seeds::stream(config.seed, CHAIN_STREAM);
    let path = match config.chain_mode {
        ChainMode::Exact => sample_path_exact(g, config.initial_regime, config.horizon, &mut rng)?,
        ChainMode::Discretized => sample_path_discretized(
            g,
            config.initial_regime,
            config.horizon,
            config.dt,
            &mut rng,
        )?,
    };
    Ok(path)
}

/// Integrates the regime-switching model along a freshly sampled regime path.
///
/// Samples are recorded at every `output_stride`-th grid step and always at
/// the final step, so the last sample sits at the horizon.
pub fn simulate(
    config: &SimulationConfig,
    g: &Generator,
    table: &RegimeParameterTable,
    h: &PolicyFunction,
) -> Result<Trajectory, IntegratorError> {
    config.validate()?;
    if table.len() != g.n_states() {
        return Err(IntegratorError::DimensionMismatch {
            table: table.len(),
            generator: g.n_states(),
        });
    }
    let path = sample_regime_path(config, g)?;
    simulate_on_path(config, path, table, h)
}

/// As [`simulate`], on a caller-supplied regime path.
pub fn simulate_on_path(
    config: &SimulationConfig,
    path: RegimePath,
    table: &RegimeParameterTable,
    h: &PolicyFunction,
) -> Result<Trajectory, IntegratorError> {
    config.validate()?;
    if table.len() != path.n_states() {
        return Err(IntegratorError::DimensionMismatch {
            table: table.len(),
            generator: path.n_states(),
        });
    }
    let started = Instant::now();
    let (dt, horizon, stride) = (config.dt, config.horizon, config.output_stride);
    let steps = grid_steps(horizon, dt);
    let mut rng = seeds::stream(config.seed, BROWNIAN_STREAM);

    let mut state = config.initial_state;
    let mut samples = Vec::with_capacity(steps / stride + 2);
    samples.push(Sample {
        t: 0.0,
        regime: path.regime_at(0.0),
        state,
    });
    let mut cursor = path.cursor();
    let mut clamp_events = 0u64;
    for n in 0..steps {
        let t = grid_time(n, dt, horizon);
        let t_next = grid_time(n + 1, dt, horizon);
        let h_step = t_next - t;
        let params = table.get(cursor.regime_at(t));
        let z: f64 = StandardNormal.sample(&mut rng);
        let db = h_step.sqrt() * z;
        let raw = config.scheme.raw_step(&state, params, h, h_step, db);
        let outcome = config.negativity_policy.apply(raw, t_next)?;
        if outcome.clamped > 0 {
            clamp_events += u64::from(outcome.clamped);
            log::debug!("clamped {} component(s) at t = {t_next}", outcome.clamped);
        }
        state = outcome.state;
        if should_record(n + 1, steps, stride) {
            samples.push(Sample {
                t: t_next,
                regime: path.regime_at(t_next),
                state,
            });
        }
    }
    Ok(Trajectory {
        samples,
        regime_path: Some(path),
        meta: TrajectoryMeta {
            config: Some(config.clone()),
            clamp_events,
            wall_time: started.elapsed(),
        },
    })
}

/// Runs `n` trajectories in parallel; trajectory `i` uses seed
/// `derive_seed(base_seed, i)`. Output order follows the index.
pub fn simulate_ensemble(
    config: &SimulationConfig,
    g: &Generator,
    table: &RegimeParameterTable,
    h: &PolicyFunction,
    base_seed: u64,
    n: usize,
) -> Result<Vec<Trajectory>, IntegratorError> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = config.clone().with_seed(derive_seed(base_seed, i));
            simulate(&cfg, g, table, h)
        })
        .collect()
}

fn rk4_step(state: &EpidemicState, params: &RegimeParameters, m: f64, dt: f64) -> EpidemicState {
    let x = state.to_array();
    let at = |k: &[f64; 5], scale: f64| {
        EpidemicState::from_array(std::array::from_fn(|j| x[j] + scale * k[j]))
    };
    let k1 = deterministic_drift(state, params, m);
    let k2 = deterministic_drift(&at(&k1, 0.5 * dt), params, m);
    let k3 = deterministic_drift(&at(&k2, 0.5 * dt), params, m);
    let k4 = deterministic_drift(&at(&k3, dt), params, m);
    EpidemicState::from_array(std::array::from_fn(|j| {
        x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    }))
}

/// Classical fourth-order Runge–Kutta integration of the deterministic model
/// with policy intensity `m`, on the same grid and recording rule as
/// [`simulate`]. Samples carry regime index 0.
pub fn simulate_deterministic(
    initial: EpidemicState,
    params: &RegimeParameters,
    m: f64,
    dt: f64,
    horizon: f64,
    stride: usize,
) -> Result<Trajectory, IntegratorError> {
    SimulationConfig::new(initial, 0, dt, horizon)
        .with_stride(stride)
        .validate()?;
    let started = Instant::now();
    let steps = grid_steps(horizon, dt);
    let mut state = initial;
    let mut samples = vec![Sample {
        t: 0.0,
        regime: 0,
        state,
    }];
    for n in 0..steps {
        let t_next = grid_time(n + 1, dt, horizon);
        state = rk4_step(&state, params, m, t_next - grid_time(n, dt, horizon));
        if should_record(n + 1, steps, stride) {
            samples.push(Sample {
                t: t_next,
                regime: 0,
                state,
            });
        }
    }
    Ok(Trajectory {
        samples,
        regime_path: None,
        meta: TrajectoryMeta {
            config: None,
            clamp_events: 0,
            wall_time: started.elapsed(),
        },
    })
}
