//! SEQIR state, per-regime parameters, the policy incidence function and the
//! drift/diffusion fields of the regime-switching model.
//!
//! The stochastic system in regime `k` reads
//!
//! ```text
//! dS = [A - b w1 S E + b1 Q - xi S - p M h(S)] dt - s0 w1 S E dB
//! dE = [b w1 S E - w2 E] dt                      + s0 w1 S E dB
//! dQ = [b2 E - (b1 + c + xi) Q] dt
//! dI = [alpha E + c Q - (eta + xi + delta) I] dt
//! dR = [eta I + sigma E - xi R + p M h(S)] dt
//! ```
//!
//! with `w1 = (1 - rho1)(1 - rho2)` and `w2 = b2 + alpha + sigma + xi`. A single
//! scalar Brownian motion drives both `S` and `E`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{field}` of regime {regime} is invalid: {reason}")]
    InvalidParameter {
        regime: usize,
        field: &'static str,
        reason: String,
    },
    #[error("parameter table is empty")]
    EmptyTable,
    #[error("invariant set is degenerate: minimum natural death rate is zero")]
    DegenerateBounds,
    #[error("policy function violates 0 <= h(s) <= s h'(0) at s = {at}: h = {value}")]
    PolicyAssumption { at: f64, value: f64 },
    #[error("policy parameter invalid: {0}")]
    InvalidPolicy(String),
}

/// Compartment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compartment {
    S,
    E,
    Q,
    I,
    R,
}

impl Compartment {
    pub const ALL: [Compartment; 5] = [Self::S, Self::E, Self::Q, Self::I, Self::R];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["S", "E", "Q", "I", "R"][self.index()]
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Compartment sizes `(S, E, Q, I, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpidemicState {
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
}

impl EpidemicState {
    pub fn new(s: f64, e: f64, q: f64, i: f64, r: f64) -> Self {
        Self { s, e, q, i, r }
    }

    pub fn from_array(x: [f64; 5]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4])
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.s, self.e, self.q, self.i, self.r]
    }

    pub fn get(&self, c: Compartment) -> f64 {
        self.to_array()[c.index()]
    }

    /// Total population `S + E + Q + I + R`.
    pub fn total(&self) -> f64 {
        self.s + self.e + self.q + self.i + self.r
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&x| x >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Epidemiological and policy parameters of one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParameters {
    /// Recruitment rate.
    #[serde(rename = "A")]
    pub a: f64,
    /// Transmission rate.
    pub beta: f64,
    /// Precaution fraction of susceptibles.
    pub rho1: f64,
    /// Precaution fraction of exposed.
    pub rho2: f64,
    /// Quarantined back to susceptible.
    pub b1: f64,
    /// Exposed to quarantined.
    pub b2: f64,
    /// Quarantined to infected.
    pub c: f64,
    /// Natural death rate.
    pub xi: f64,
    /// Disease death rate.
    pub delta: f64,
    /// Exposed to infected.
    pub alpha: f64,
    /// Recovery rate of exposed.
    pub sigma: f64,
    /// Recovery rate of infected.
    pub eta: f64,
    /// Policy implementation rate.
    pub p: f64,
    /// Policy intensity.
    #[serde(rename = "M")]
    pub m: f64,
    /// White-noise intensity on the transmission rate.
    pub sigma0: f64,
}

impl RegimeParameters {
    pub const FIELD_NAMES: [&'static str; 15] = [
        "A", "beta", "rho1", "rho2", "b1", "b2", "c", "xi", "delta", "alpha", "sigma", "eta",
        "p", "M", "sigma0",
    ];

    pub fn fields(&self) -> [f64; 15] {
        [
            self.a, self.beta, self.rho1, self.rho2, self.b1, self.b2, self.c, self.xi,
            self.delta, self.alpha, self.sigma, self.eta, self.p, self.m, self.sigma0,
        ]
    }

    /// All-zero parameters; handy as a starting point for reduced models.
    pub fn zero() -> Self {
        Self::from_fields([0.0; 15])
    }

    pub fn from_fields(f: [f64; 15]) -> Self {
        Self {
            a: f[0],
            beta: f[1],
            rho1: f[2],
            rho2: f[3],
            b1: f[4],
            b2: f[5],
            c: f[6],
            xi: f[7],
            delta: f[8],
            alpha: f[9],
            sigma: f[10],
            eta: f[11],
            p: f[12],
            m: f[13],
            sigma0: f[14],
        }
    }

    /// Finite and non-negative everywhere. This is all the runtime needs.
    pub fn validate_basic(&self, regime: usize) -> Result<(), ModelError> {
        for (name, v) in Self::FIELD_NAMES.iter().zip(self.fields()) {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidParameter {
                    regime,
                    field: name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Ranges enforced when loading configuration: precaution fractions in
    /// the open unit interval, positive recruitment and natural death.
    pub fn validate_strict(&self, regime: usize) -> Result<(), ModelError> {
        self.validate_basic(regime)?;
        let open_unit = |field: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    regime,
                    field,
                    reason: format!("must lie in (0, 1), got {v}"),
                })
            }
        };
        open_unit("rho1", self.rho1)?;
        open_unit("rho2", self.rho2)?;
        for (field, v) in [("A", self.a), ("xi", self.xi)] {
            if v <= 0.0 {
                return Err(ModelError::InvalidParameter {
                    regime,
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// `(1 - rho1)(1 - rho2)`.
pub fn w1(params: &RegimeParameters) -> f64 {
    (1.0 - params.rho1) * (1.0 - params.rho2)
}

/// `b2 + alpha + sigma + xi`, the total exit rate of the exposed class.
pub fn w2(params: &RegimeParameters) -> f64 {
    params.b2 + params.alpha + params.sigma + params.xi
}

/// Min/max of each parameter over the regimes (hat = min, check = max).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub min: RegimeParameters,
    pub max: RegimeParameters,
}

/// One parameter row per regime, with cached extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeParameterTable {
    rows: Vec<RegimeParameters>,
    extremes: Extremes,
}

impl RegimeParameterTable {
    pub fn new(rows: Vec<RegimeParameters>) -> Result<Self, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        for (k, row) in rows.iter().enumerate() {
            row.validate_basic(k)?;
        }
        let mut min = rows[0].fields();
        let mut max = rows[0].fields();
        for row in &rows[1..] {
            for (j, v) in row.fields().into_iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let extremes = Extremes {
            min: RegimeParameters::from_fields(min),
            max: RegimeParameters::from_fields(max),
        };
        Ok(Self { rows, extremes })
    }

    /// As [`new`](Self::new), additionally enforcing the strict ranges.
    pub fn new_strict(rows: Vec<RegimeParameters>) -> Result<Self, ModelError> {
        for (k, row) in rows.iter().enumerate() {
            row.validate_strict(k)?;
        }
        Self::new(rows)
    }

    pub fn single(params: RegimeParameters) -> Result<Self, ModelError> {
        Self::new(vec![params])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[RegimeParameters] {
        &self.rows
    }

    pub fn get(&self, k: usize) -> &RegimeParameters {
        &self.rows[k]
    }

    pub fn min(&self) -> &RegimeParameters {
        &self.extremes.min
    }

    pub fn max(&self) -> &RegimeParameters {
        &self.extremes.max
    }

    /// Smallest recruitment rate.
    pub fn a_min(&self) -> f64 {
        self.extremes.min.a
    }

    /// Largest recruitment rate.
    pub fn a_max(&self) -> f64 {
        self.extremes.max.a
    }

    pub fn xi_min(&self) -> f64 {
        self.extremes.min.xi
    }

    pub fn xi_max(&self) -> f64 {
        self.extremes.max.xi
    }

    pub fn delta_max(&self) -> f64 {
        self.extremes.max.delta
    }

    pub fn beta_max(&self) -> f64 {
        self.extremes.max.beta
    }

    pub fn sigma0_min(&self) -> f64 {
        self.extremes.min.sigma0
    }

    /// Upper face `max A / min xi` of the invariant set.
    pub fn population_cap(&self) -> Result<f64, ModelError> {
        if self.xi_min() <= 0.0 {
            return Err(ModelError::DegenerateBounds);
        }
        Ok(self.a_max() / self.xi_min())
    }

    /// The same table with one row replaced; extremes are recomputed.
    pub fn with_row(&self, k: usize, row: RegimeParameters) -> Result<Self, ModelError> {
        let mut rows = self.rows.clone();
        rows[k] = row;
        Self::new(rows)
    }

    pub fn map_rows(
        &self,
        f: impl FnMut(&RegimeParameters) -> RegimeParameters,
    ) -> Result<Self, ModelError> {
        Self::new(self.rows.iter().map(f).collect())
    }
}

/// Bounds of the positively invariant set for the total population:
/// `[min A / (max xi + max delta), max A / min xi]`.
pub fn invariant_set_bounds(table: &RegimeParameterTable) -> Result<(f64, f64), ModelError> {
    let upper = table.population_cap()?;
    let lower = table.a_min() / (table.xi_max() + table.delta_max());
    Ok((lower, upper))
}

type PolicyFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Policy incidence `h(S)` with `h(0) = 0` and `0 <= h(s) <= s h'(0)`.
#[derive(Clone)]
pub enum PolicyFunction {
    /// `h(s) = s`.
    Linear,
    /// `h(s) = s / (1 + a s)`, `a > 0`.
    Saturating { a: f64 },
    /// User-supplied `h`, admitted through [`PolicyFunction::custom`].
    Custom { h: PolicyFn, slope_at_zero: f64 },
}

impl fmt::Debug for PolicyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => f.write_str("Linear"),
            Self::Saturating { a } => f.debug_struct("Saturating").field("a", a).finish(),
            Self::Custom { slope_at_zero, .. } => f
                .debug_struct("Custom")
                .field("slope_at_zero", slope_at_zero)
                .finish_non_exhaustive(),
        }
    }
}

/// Samples used by the custom-policy admission check.
pub const POLICY_CHECK_SAMPLES: usize = 10_000;

impl PolicyFunction {
    pub fn saturating(a: f64) -> Result<Self, ModelError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(ModelError::InvalidPolicy(format!(
                "saturation constant must be > 0, got {a}"
            )));
        }
        Ok(Self::Saturating { a })
    }

    /// Admits a custom `h` after checking `h(0) = 0` and
    /// `0 <= h(s) <= s h'(0)` on a dense grid over `[0, 10 * max A / min xi]`.
    /// Also rejects grids where the second difference blows up, a crude
    /// stand-in for twice-differentiability.
    pub fn custom(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope_at_zero: f64,
        table: &RegimeParameterTable,
    ) -> Result<Self, ModelError> {
        if !(slope_at_zero >= 0.0) || !slope_at_zero.is_finite() {
            return Err(ModelError::InvalidPolicy(format!(
                "h'(0) must be finite and >= 0, got {slope_at_zero}"
            )));
        }
        let policy = Self::Custom {
            h: Arc::new(h),
            slope_at_zero,
        };
        policy.check_assumptions(10.0 * table.population_cap()?)?;
        Ok(policy)
    }

    /// Verifies the sublinear bound on `POLICY_CHECK_SAMPLES + 1` points of `[0, upper]`.
    pub fn check_assumptions(&self, upper: f64) -> Result<(), ModelError> {
        let h0 = self.eval(0.0);
        if h0 != 0.0 {
            return Err(ModelError::PolicyAssumption { at: 0.0, value: h0 });
        }
        let slope = self.slope_at_zero();
        let ds = upper / POLICY_CHECK_SAMPLES as f64;
        let mut prev = [h0, h0];
        for k in 1..=POLICY_CHECK_SAMPLES {
            let s = k as f64 * ds;
            let v = self.eval(s);
            let tol = 1e-12 * (1.0 + s * slope);
            if !v.is_finite() || v < -tol || v > s * slope + tol {
                return Err(ModelError::PolicyAssumption { at: s, value: v });
            }
            if k >= 2 {
                let second = (v - 2.0 * prev[1] + prev[0]) / (ds * ds);
                if !second.is_finite() {
                    return Err(ModelError::InvalidPolicy(format!(
                        "h is not smooth near s = {s}"
                    )));
                }
            }
            prev = [prev[1], v];
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Linear => s,
            Self::Saturating { a } => s / (1.0 + a * s),
            Self::Custom { h, .. } => h(s),
        }
    }

    /// `h'(0)`.
    pub fn slope_at_zero(&self) -> f64 {
        match self {
            Self::Linear | Self::Saturating { .. } => 1.0,
            Self::Custom { slope_at_zero, .. } => *slope_at_zero,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Saturating { .. } => "saturating",
            Self::Custom { .. } => "custom",
        }
    }
}

/// Drift of the stochastic model, `(dS, dE, dQ, dI, dR) / dt`.
pub fn drift(state: &EpidemicState, params: &RegimeParameters, h: &PolicyFunction) -> [f64; 5] {
    let EpidemicState { s, e, q, i, r } = *state;
    let infection = params.beta * w1(params) * s * e;
    let removal = params.p * params.m * h.eval(s);
    [
        params.a - infection + params.b1 * q - params.xi * s - removal,
        infection - w2(params) * e,
        params.b2 * e - (params.b1 + params.c + params.xi) * q,
        params.alpha * e + params.c * q - (params.eta + params.xi + params.delta) * i,
        params.eta * i + params.sigma * e - params.xi * r + removal,
    ]
}

/// Diffusion vector for the single Brownian driver: `(-g, g, 0, 0, 0)` with
/// `g = sigma0 w1 S E`.
pub fn diffusion(state: &EpidemicState, params: &RegimeParameters) -> [f64; 5] {
    let g = params.sigma0 * w1(params) * state.s * state.e;
    [-g, g, 0.0, 0.0, 0.0]
}

/// Vector field of the deterministic model: linear incidence `p S M` with
/// the policy intensity `m` held fixed, no noise.
pub fn deterministic_drift(state: &EpidemicState, params: &RegimeParameters, m: f64) -> [f64; 5] {
    let frozen = RegimeParameters { m, ..*params };
    drift(state, &frozen, &PolicyFunction::Linear)
}
