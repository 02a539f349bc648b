//! Closed-form extinction and persistence thresholds.
//!
//! Notation: `U = max A / min xi` is the population cap, hats are minima and
//! checks are maxima over regimes. With `pi` the stationary law,
//!
//! ```text
//! R*   = sum pi b w1 U / sum pi [w2 + s0^2/2 w1^2 U^2]
//! R~*  = sum pi b w1 U / Lambda
//! Lambda = sum pi [w2 + psi1 + s0^2/2 w1^2 U^2]
//! C(k) = max(b) w1(k) - min(s0)^2/2 w1(k)^2 U
//! psi1 = C (max A^2 xi / (A min xi^2)) (1 - A min xi / (max A xi) + p M h'(0) / xi)
//! psi2 = C (max A^2 / (A min xi^2)) max(b) w1
//! psi3 = C max A / (A min xi)
//! ```
//!
//! `R* < 1` plus `b(k) >= s0(k)^2 w1(k) U` for every regime certifies
//! exponential extinction of E, Q, I; `R~* > 1` with the same inequality
//! certifies persistence in mean with the lower bounds of
//! [`persistence_bounds`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{w1, w2, ModelError, PolicyFunction, RegimeParameterTable};
use crate::regime_chain::{stationary_distribution, ChainError, Generator, StationaryDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("table has {table} regimes but the distribution has {pi} entries")]
    DimensionMismatch { table: usize, pi: usize },
    #[error("recruitment rate of regime {regime} is zero")]
    DivisionByZero { regime: usize },
    #[error("persistence threshold {rtilde} does not exceed 1")]
    NotPersistent { rtilde: f64 },
    #[error("stationary average of psi2 is zero")]
    DegeneratePsi2,
}

fn check_dims(table: &RegimeParameterTable, pi: &StationaryDistribution) -> Result<(), ThresholdError> {
    if table.len() != pi.len() {
        return Err(ThresholdError::DimensionMismatch {
            table: table.len(),
            pi: pi.len(),
        });
    }
    Ok(())
}

/// `sum pi(k) f(k)`, propagating the first error.
fn pi_average(
    pi: &StationaryDistribution,
    mut f: impl FnMut(usize) -> Result<f64, ThresholdError>,
) -> Result<f64, ThresholdError> {
    let mut acc = 0.0;
    for k in 0..pi.len() {
        acc += pi.get(k) * f(k)?;
    }
    Ok(acc)
}

/// Stationary average of `b w1 U`, the numerator shared by both thresholds.
pub fn transmission_numerator(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
) -> Result<f64, ThresholdError> {
    check_dims(table, pi)?;
    let cap = table.population_cap()?;
    pi_average(pi, |k| {
        let p = table.get(k);
        Ok(p.beta * w1(p) * cap)
    })
}

fn noise_penalty(table: &RegimeParameterTable, k: usize, cap: f64) -> f64 {
    let p = table.get(k);
    let w = w1(p);
    0.5 * p.sigma0 * p.sigma0 * w * w * cap * cap
}

/// Extinction threshold `R*`.
pub fn compute_rs_star(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
) -> Result<f64, ThresholdError> {
    let numerator = transmission_numerator(table, pi)?;
    let cap = table.population_cap()?;
    let denominator = pi_average(pi, |k| Ok(w2(table.get(k)) + noise_penalty(table, k, cap)))?;
    Ok(numerator / denominator)
}

/// `C(k) = max(b) w1(k) - min(s0)^2 / 2 w1(k)^2 U`, the factor shared by the psi terms.
pub fn common_factor(table: &RegimeParameterTable, k: usize) -> Result<f64, ThresholdError> {
    let cap = table.population_cap()?;
    let w = w1(table.get(k));
    let s0 = table.sigma0_min();
    Ok(table.beta_max() * w - 0.5 * s0 * s0 * w * w * cap)
}

fn recruitment(table: &RegimeParameterTable, k: usize) -> Result<f64, ThresholdError> {
    let a = table.get(k).a;
    if a == 0.0 {
        return Err(ThresholdError::DivisionByZero { regime: k });
    }
    Ok(a)
}

/// `1 - A(k) min xi / (max A xi(k)) + p(k) M(k) h'(0) / xi(k)`.
pub fn policy_bracket(table: &RegimeParameterTable, k: usize, h_slope: f64) -> f64 {
    let p = table.get(k);
    1.0 - p.a * table.xi_min() / (table.a_max() * p.xi) + p.p * p.m * h_slope / p.xi
}

pub fn compute_psi1(
    table: &RegimeParameterTable,
    k: usize,
    h_slope: f64,
) -> Result<f64, ThresholdError> {
    let a = recruitment(table, k)?;
    let (a_max, xi_min) = (table.a_max(), table.xi_min());
    let xi = table.get(k).xi;
    Ok(common_factor(table, k)?
        * (a_max * a_max * xi / (a * xi_min * xi_min))
        * policy_bracket(table, k, h_slope))
}

pub fn compute_psi2(table: &RegimeParameterTable, k: usize) -> Result<f64, ThresholdError> {
    let a = recruitment(table, k)?;
    let (a_max, xi_min) = (table.a_max(), table.xi_min());
    Ok(common_factor(table, k)?
        * (a_max * a_max / (a * xi_min * xi_min))
        * table.beta_max()
        * w1(table.get(k)))
}

pub fn compute_psi3(table: &RegimeParameterTable, k: usize) -> Result<f64, ThresholdError> {
    let a = recruitment(table, k)?;
    Ok(common_factor(table, k)? * table.a_max() / (a * table.xi_min()))
}

/// `Lambda = sum pi [s0^2/2 w1^2 U^2 + w2 + psi1]`.
pub fn compute_lambda(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
    h_slope: f64,
) -> Result<f64, ThresholdError> {
    check_dims(table, pi)?;
    let cap = table.population_cap()?;
    pi_average(pi, |k| {
        Ok(noise_penalty(table, k, cap) + w2(table.get(k)) + compute_psi1(table, k, h_slope)?)
    })
}

/// Persistence threshold `R~*`.
pub fn compute_rtilde_star(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
    h_slope: f64,
) -> Result<f64, ThresholdError> {
    Ok(transmission_numerator(table, pi)? / compute_lambda(table, pi, h_slope)?)
}

/// Lower bounds on the long-run time averages of E, Q and I.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceBounds {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "I")]
    pub i: f64,
}

/// Requires `R~* > 1`.
pub fn persistence_bounds(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
    h_slope: f64,
) -> Result<PersistenceBounds, ThresholdError> {
    let rtilde = compute_rtilde_star(table, pi, h_slope)?;
    if !(rtilde > 1.0) {
        return Err(ThresholdError::NotPersistent { rtilde });
    }
    persistence_bounds_unchecked(table, pi, h_slope)
}

/// The bound formulas without the `R~* > 1` precondition; at `R~* = 1` all
/// three vanish and below it they turn negative.
pub fn persistence_bounds_unchecked(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
    h_slope: f64,
) -> Result<PersistenceBounds, ThresholdError> {
    let lambda = compute_lambda(table, pi, h_slope)?;
    let rtilde = transmission_numerator(table, pi)? / lambda;
    let psi2_avg = pi_average(pi, |k| compute_psi2(table, k))?;
    if psi2_avg == 0.0 {
        return Err(ThresholdError::DegeneratePsi2);
    }
    let (min, max) = (table.min(), table.max());
    let e = lambda * (rtilde - 1.0) / psi2_avg;
    let q_outflow = max.b1 + max.c + max.xi;
    let q = min.b2 * e / q_outflow;
    let i = (min.alpha + min.c * min.b2 / q_outflow) * e / (max.eta + max.xi + max.delta);
    Ok(PersistenceBounds { e, q, i })
}

/// `R*` with no noise and a single regime: `b w1 (A / xi) / w2`.
pub fn basic_reproduction_number(params: &crate::model::RegimeParameters) -> f64 {
    params.beta * w1(params) * (params.a / params.xi) / w2(params)
}

/// `sum pi [b w1 U - s0^2/2 w1^2 U^2 - w2]`, the almost-sure upper bound on
/// the exponential growth rate of E under the extinction hypotheses.
pub fn extinction_rate_bound(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
) -> Result<f64, ThresholdError> {
    check_dims(table, pi)?;
    let cap = table.population_cap()?;
    pi_average(pi, |k| {
        let p = table.get(k);
        Ok(p.beta * w1(p) * cap - noise_penalty(table, k, cap) - w2(p))
    })
}

/// Per-regime hypotheses of the threshold theorems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `b(k) >= s0(k)^2 w1(k) U`.
    pub beta_noise: Vec<bool>,
    /// `b(k) >= s0(k)^2 w1(k) U / 2`.
    pub beta_noise_half: Vec<bool>,
    /// `policy_bracket(k) > 0`.
    pub policy_bracket_positive: Vec<bool>,
}

impl ConditionReport {
    pub fn all_beta_noise(&self) -> bool {
        self.beta_noise.iter().all(|&b| b)
    }
}

pub fn check_conditions(
    table: &RegimeParameterTable,
    h_slope: f64,
) -> Result<ConditionReport, ThresholdError> {
    let cap = table.population_cap()?;
    let mut report = ConditionReport {
        beta_noise: Vec::with_capacity(table.len()),
        beta_noise_half: Vec::with_capacity(table.len()),
        policy_bracket_positive: Vec::with_capacity(table.len()),
    };
    for (k, p) in table.rows().iter().enumerate() {
        let rhs = p.sigma0 * p.sigma0 * w1(p) * cap;
        report.beta_noise.push(p.beta >= rhs);
        report.beta_noise_half.push(p.beta >= 0.5 * rhs);
        report
            .policy_bracket_positive
            .push(policy_bracket(table, k, h_slope) > 0.0);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ExtinctionCertified,
    PersistenceCertified,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExtinctionCertified => "extinction_certified",
            Self::PersistenceCertified => "persistence_certified",
            Self::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub verdict: Verdict,
    pub rs_star: f64,
    pub rtilde_star: f64,
    pub lambda: f64,
    pub extinction_rate_bound: f64,
    pub population_cap: f64,
    pub stationary: StationaryDistribution,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    pub psi3: Vec<f64>,
    pub conditions: ConditionReport,
    /// Present only when `R~* > 1`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bounds: Option<PersistenceBounds>,
}

pub fn decide(conditions: &ConditionReport, rs_star: f64, rtilde_star: f64) -> Verdict {
    if !conditions.all_beta_noise() {
        Verdict::Indeterminate
    } else if rs_star < 1.0 {
        Verdict::ExtinctionCertified
    } else if rtilde_star > 1.0 {
        Verdict::PersistenceCertified
    } else {
        Verdict::Indeterminate
    }
}

/// Everything above in one pass, with the stationary law computed from `g`.
pub fn threshold_report(
    table: &RegimeParameterTable,
    g: &Generator,
    h: &PolicyFunction,
) -> Result<ThresholdReport, ThresholdError> {
    let pi = stationary_distribution(g)?;
    threshold_report_with(table, &pi, h.slope_at_zero())
}

pub fn threshold_report_with(
    table: &RegimeParameterTable,
    pi: &StationaryDistribution,
    h_slope: f64,
) -> Result<ThresholdReport, ThresholdError> {
    check_dims(table, pi)?;
    let per_regime = |f: &dyn Fn(usize) -> Result<f64, ThresholdError>| -> Result<Vec<f64>, ThresholdError> {
        (0..table.len()).map(f).collect()
    };
    let rs_star = compute_rs_star(table, pi)?;
    let lambda = compute_lambda(table, pi, h_slope)?;
    let rtilde_star = transmission_numerator(table, pi)? / lambda;
    let conditions = check_conditions(table, h_slope)?;
    let bounds = if rtilde_star > 1.0 {
        Some(persistence_bounds_unchecked(table, pi, h_slope)?)
    } else {
        None
    };
    Ok(ThresholdReport {
        verdict: decide(&conditions, rs_star, rtilde_star),
        rs_star,
        rtilde_star,
        lambda,
        extinction_rate_bound: extinction_rate_bound(table, pi)?,
        population_cap: table.population_cap()?,
        stationary: pi.clone(),
        psi1: per_regime(&|k| compute_psi1(table, k, h_slope))?,
        psi2: per_regime(&|k| compute_psi2(table, k))?,
        psi3: per_regime(&|k| compute_psi3(table, k))?,
        conditions,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegimeParameters;
    use crate::reference;

    fn single(p: RegimeParameters) -> (RegimeParameterTable, StationaryDistribution) {
        let g = Generator::single();
        (
            RegimeParameterTable::single(p).unwrap(),
            stationary_distribution(&g).unwrap(),
        )
    }

    fn base() -> RegimeParameters {
        *reference::persistence_table().get(0)
    }

    #[test]
    fn rs_star_single_regime_no_noise() {
        let p = RegimeParameters { sigma0: 0.0, ..base() };
        let (t, pi) = single(p);
        let r = compute_rs_star(&t, &pi).unwrap();
        let want = p.beta * w1(&p) * (p.a / p.xi) / w2(&p);
        assert!((r - want).abs() <= 1e-14 * want);
        assert!((basic_reproduction_number(&p) - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn rs_star_increases_with_beta() {
        let t = reference::extinction_table();
        let pi = stationary_distribution(&reference::generator()).unwrap();
        let doubled = t
            .map_rows(|p| RegimeParameters { beta: 2.0 * p.beta, ..*p })
            .unwrap();
        let r1 = compute_rs_star(&t, &pi).unwrap();
        let r2 = compute_rs_star(&doubled, &pi).unwrap();
        assert!(r2 > r1);
        assert!((r2 - 2.0 * r1).abs() < 1e-14);
    }

    #[test]
    fn psi1_vanishes_without_policy_in_single_regime() {
        let p = RegimeParameters { p: 0.0, ..base() };
        let (t, pi) = single(p);
        assert_eq!(compute_psi1(&t, 0, 1.0).unwrap(), 0.0);
        let rs = compute_rs_star(&t, &pi).unwrap();
        let rt = compute_rtilde_star(&t, &pi, 1.0).unwrap();
        assert!((rs - rt).abs() <= 1e-15 * rs);
    }

    #[test]
    fn psi_terms_vanish_with_common_factor() {
        // choose sigma0 so that max(b) w1 = sigma0^2/2 w1^2 U
        let mut p = base();
        let cap = p.a / p.xi;
        p.sigma0 = (2.0 * p.beta / (w1(&p) * cap)).sqrt();
        let (t, _) = single(p);
        assert!(common_factor(&t, 0).unwrap().abs() < 1e-15);
        for v in [
            compute_psi1(&t, 0, 1.0).unwrap(),
            compute_psi2(&t, 0).unwrap(),
            compute_psi3(&t, 0).unwrap(),
        ] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn psi_requires_recruitment() {
        let (t, _) = single(RegimeParameters { a: 0.0, ..base() });
        assert!(matches!(
            compute_psi2(&t, 0),
            Err(ThresholdError::DivisionByZero { regime: 0 })
        ));
    }

    #[test]
    fn lambda_reduces_to_w2() {
        let p = RegimeParameters {
            sigma0: 0.0,
            p: 0.0,
            ..base()
        };
        let (t, pi) = single(p);
        assert!((compute_lambda(&t, &pi, 1.0).unwrap() - w2(&p)).abs() < 1e-15);
    }

    #[test]
    fn rtilde_lambda_identity() {
        for t in [reference::extinction_table(), reference::persistence_table()] {
            let pi = stationary_distribution(&reference::generator()).unwrap();
            let num = transmission_numerator(&t, &pi).unwrap();
            let lambda = compute_lambda(&t, &pi, 1.0).unwrap();
            let rt = compute_rtilde_star(&t, &pi, 1.0).unwrap();
            assert!(lambda > 0.0);
            assert!((rt * lambda - num).abs() <= 1e-12 * num);
        }
    }

    #[test]
    fn bounds_require_persistence() {
        let t = reference::extinction_table();
        let pi = stationary_distribution(&reference::generator()).unwrap();
        assert!(matches!(
            persistence_bounds(&t, &pi, 1.0),
            Err(ThresholdError::NotPersistent { .. })
        ));
    }

    #[test]
    fn bounds_ratio_structure() {
        let t = reference::persistence_table();
        let pi = stationary_distribution(&reference::generator()).unwrap();
        let b = persistence_bounds_unchecked(&t, &pi, 1.0).unwrap();
        let (min, max) = (t.min(), t.max());
        let ratio = min.b2 / (max.b1 + max.c + max.xi);
        assert!((b.q / b.e - ratio).abs() < 1e-14);
    }

    #[test]
    fn bounds_vanish_at_threshold_one() {
        // single regime without policy: psi1 = 0, pick beta so that R~* = 1
        let mut p = RegimeParameters { p: 0.0, ..base() };
        let cap = p.a / p.xi;
        let w = w1(&p);
        p.beta = (w2(&p) + 0.5 * p.sigma0 * p.sigma0 * w * w * cap * cap) / (w * cap);
        let (t, pi) = single(p);
        let rt = compute_rtilde_star(&t, &pi, 1.0).unwrap();
        assert!((rt - 1.0).abs() < 1e-14);
        let b = persistence_bounds_unchecked(&t, &pi, 1.0).unwrap();
        assert!(b.e.abs() < 1e-12 && b.q.abs() < 1e-12 && b.i.abs() < 1e-12);
    }

    #[test]
    fn conditions_without_noise_hold() {
        let t = reference::extinction_table()
            .map_rows(|p| RegimeParameters { sigma0: 0.0, ..*p })
            .unwrap();
        let c = check_conditions(&t, 1.0).unwrap();
        assert!(c.beta_noise.iter().all(|&b| b));
        assert!(c.beta_noise_half.iter().all(|&b| b));
    }

    #[test]
    fn condition_boundary_is_inclusive() {
        let mut p = base();
        let cap = p.a / p.xi;
        p.sigma0 = 0.01;
        p.beta = p.sigma0 * p.sigma0 * w1(&p) * cap;
        let (t, _) = single(p);
        let c = check_conditions(&t, 1.0).unwrap();
        assert!(c.beta_noise[0]);
    }

    #[test]
    fn extinction_example_conditions() {
        let t = reference::extinction_table();
        let c = check_conditions(&t, 1.0).unwrap();
        let cap = 0.7;
        for (k, p) in t.rows().iter().enumerate() {
            let rhs = p.sigma0 * p.sigma0 * w1(p) * cap;
            assert_eq!(c.beta_noise[k], p.beta >= rhs);
            assert_eq!(c.beta_noise_half[k], p.beta >= rhs / 2.0);
        }
        assert!(c.all_beta_noise());
    }

    #[test]
    fn verdict_logic() {
        let ok = ConditionReport {
            beta_noise: vec![true, true],
            beta_noise_half: vec![true, true],
            policy_bracket_positive: vec![true, true],
        };
        let failing = ConditionReport {
            beta_noise: vec![true, false],
            ..ok.clone()
        };
        assert_eq!(decide(&ok, 0.5, 0.1), Verdict::ExtinctionCertified);
        assert_eq!(decide(&ok, 3.0, 1.5), Verdict::PersistenceCertified);
        assert_eq!(decide(&ok, 3.0, 0.5), Verdict::Indeterminate);
        assert_eq!(decide(&failing, 0.5, 0.1), Verdict::Indeterminate);
    }

    #[test]
    fn dimension_mismatch() {
        let t = reference::extinction_table();
        let pi = stationary_distribution(&Generator::single()).unwrap();
        assert!(matches!(
            compute_rs_star(&t, &pi),
            Err(ThresholdError::DimensionMismatch { .. })
        ));
    }
}
