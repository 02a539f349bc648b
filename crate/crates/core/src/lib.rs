//! Simulation and analysis of a stochastic SEQIR epidemic model whose
//! parameters switch according to a continuous-time Markov chain, with a
//! governmental-policy removal term `p M h(S)`.
//!
//! * [`regime_chain`]: generator validation, stationary law, `exp(dt Q)`,
//!   regime path samplers.
//! * [`model`]: state, parameters, policy function, drift and diffusion.
//! * [`integrator`]: Milstein / Euler–Maruyama stepping, RK4 for the
//!   deterministic limit, seeded ensembles.
//! * [`thresholds`]: extinction and persistence thresholds and bounds.
//! * [`analysis`]: time averages, extinction detection, ensemble summaries.
//! * [`reference`]: the four-regime benchmark scenarios.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod integrator;
pub mod model;
pub mod reference;
pub mod regime_chain;
pub mod seeds;
pub mod thresholds;

pub use analysis::{
    detect_extinction, exponential_rate_estimate, summarize_ensemble, time_average,
    AnalysisError, EnsembleSummary, SummaryOptions,
};
pub use integrator::{
    simulate, simulate_deterministic, simulate_ensemble, ChainMode, IntegratorError,
    NegativityPolicy, Scheme, SimulationConfig, Trajectory,
};
pub use model::{
    Compartment, EpidemicState, ModelError, PolicyFunction, RegimeParameterTable,
    RegimeParameters,
};
pub use regime_chain::{
    stationary_distribution, transition_matrix, ChainError, Generator, RegimePath,
    StationaryDistribution,
};
pub use thresholds::{threshold_report, ThresholdError, ThresholdReport, Verdict};
