//! Run configuration file (JSON).
//!
//! Regime indices are 1-based in the file and 0-based everywhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use seqir_core::integrator::{ChainMode, NegativityPolicy, Scheme};
use seqir_core::regime_chain::STEP_MAX_RATIO;
use seqir_core::{
    EpidemicState, Generator, ModelError, PolicyFunction, RegimeParameterTable,
    RegimeParameters, SimulationConfig,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generator: Vec<Vec<f64>>,
    pub regimes: Vec<RegimeParameters>,
    pub policy: PolicySection,
    pub simulation: SimulationSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    /// Reference regime for `compare-det`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Linear,
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKind,
    /// Saturation constant, required for `saturating`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub chain_mode: ChainMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub negativity_policy: NegativityPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// 1-based.
    pub regime: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { n: 1, base_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// 1-based.
    pub regime: usize,
    /// Replaces that regime's `sigma0` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
}

/// Everything the commands need, checked and converted.
#[derive(Debug, Clone)]
pub struct Setup {
    pub generator: Generator,
    pub table: RegimeParameterTable,
    pub policy: PolicyFunction,
    pub simulation: SimulationConfig,
    pub ensemble: EnsembleSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(inner.to_string())
            } else {
                CliError::Config(format!("{path}: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn initial_state(&self) -> EpidemicState {
        let i = &self.initial;
        EpidemicState::new(i.s, i.e, i.q, i.i, i.r)
    }

    /// Full validation; every error names the offending field.
    pub fn setup(&self) -> Result<Setup, CliError> {
        let generator =
            Generator::new(&self.generator).map_err(|e| CliError::Config(format!("generator: {e}")))?;
        let n = generator.n_states();
        if self.regimes.len() != n {
            return Err(CliError::Config(format!(
                "regimes: {} entries but the generator has {n} states",
                self.regimes.len()
            )));
        }
        let table = RegimeParameterTable::new_strict(self.regimes.clone()).map_err(model_error)?;
        let policy = match (self.policy.kind, self.policy.a) {
            (PolicyKind::Linear, None) => PolicyFunction::Linear,
            (PolicyKind::Linear, Some(_)) => {
                return Err(CliError::Config("policy.a: only valid for kind saturating".into()))
            }
            (PolicyKind::Saturating, Some(a)) => PolicyFunction::saturating(a)
                .map_err(|e| CliError::Config(format!("policy.a: {e}")))?,
            (PolicyKind::Saturating, None) => {
                return Err(CliError::Config("policy.a: required for kind saturating".into()))
            }
        };
        if !(1..=n).contains(&self.initial.regime) {
            return Err(CliError::Config(format!(
                "initial.regime: must be in 1..={n}, got {}",
                self.initial.regime
            )));
        }
        let sim = &self.simulation;
        let simulation = SimulationConfig {
            dt: sim.dt,
            horizon: sim.horizon,
            scheme: sim.scheme,
            chain_mode: sim.chain_mode,
            seed: sim.seed,
            initial_state: self.initial_state(),
            initial_regime: self.initial.regime - 1,
            output_stride: sim.stride,
            negativity_policy: sim.negativity_policy,
        };
        simulation
            .validate()
            .map_err(|e| CliError::Config(format!("simulation: {e}")))?;
        let ratio = sim.dt * generator.max_exit_rate();
        if sim.chain_mode == ChainMode::Discretized && ratio > STEP_MAX_RATIO {
            return Err(CliError::Config(format!(
                "simulation.dt: dt * max exit rate = {ratio} exceeds {STEP_MAX_RATIO}"
            )));
        }
        if self.ensemble.n == 0 {
            return Err(CliError::Config("ensemble.n: must be >= 1".into()));
        }
        if let Some(cmp) = &self.compare {
            if !(1..=n).contains(&cmp.regime) {
                return Err(CliError::Config(format!(
                    "compare.regime: must be in 1..={n}, got {}",
                    cmp.regime
                )));
            }
            if let Some(s0) = cmp.sigma0 {
                if !(s0 >= 0.0) || !s0.is_finite() {
                    return Err(CliError::Config(format!(
                        "compare.sigma0: must be finite and >= 0, got {s0}"
                    )));
                }
            }
        }
        Ok(Setup {
            generator,
            table,
            policy,
            simulation,
            ensemble: self.ensemble.clone(),
        })
    }
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidParameter {
            regime,
            field,
            reason,
        } => CliError::Config(format!("regimes[{regime}].{field}: {reason}")),
        other => CliError::Config(format!("regimes: {other}")),
    }
}
