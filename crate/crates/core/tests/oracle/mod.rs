//! Exact rational evaluation of the threshold formulas.
//!
//! Inputs are the published decimal strings, parsed straight into big
//! rationals; the stationary law is found by exact Gaussian elimination. No
//! code is shared with the library, so this is an independent route to every
//! number it checks. Only the final comparison rounds to `f64`.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(s: &str) -> Q {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    let scale = BigInt::from(10).pow(frac.len() as u32);
    Q::new(digits, scale)
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap()
}

pub const GENERATOR: [[i64; 4]; 4] = [
    [-10, 3, 2, 5],
    [6, -9, 2, 1],
    [3, 3, -8, 2],
    [1, 5, 3, -9],
];

/// Parameter columns as printed, in the order
/// A, beta, rho1, rho2, b1, b2, c, xi, delta, alpha, sigma, eta, p, M, sigma0.
pub const EXTINCTION: [&str; 15] = [
    "0.0008,0.0005,0.0070,0.0010",
    "0.006,0.018,0.049,0.08",
    "0.001,0.005,0.010,0.009",
    "0.001,0.005,0.007,0.003",
    "0.05,0.06,0.010,0.08",
    "0.05,0.04,0.06,0.07",
    "0.08,0.07,0.09,0.10",
    "0.011,0.010,0.019,0.02",
    "0.05,0.06,0.04,0.08",
    "0.016,0.0015,0.0017,0.0019",
    "0.003,0.005,0.006,0.004",
    "0.02,0.018,0.019,0.0021",
    "0.001,0.002,0.003,0.004",
    "0.001,0.002,0.003,0.004",
    "0.008,0.065,0.007,0.006",
];

pub fn persistence_columns() -> [&'static str; 15] {
    let mut c = EXTINCTION;
    c[0] = "0.70,0.245,0.890,0.41";
    c[1] = "0.016,0.018,0.019,0.008";
    c
}

#[derive(Clone, Debug)]
pub struct Row {
    pub a: Q,
    pub beta: Q,
    pub rho1: Q,
    pub rho2: Q,
    pub b1: Q,
    pub b2: Q,
    pub c: Q,
    pub xi: Q,
    pub delta: Q,
    pub alpha: Q,
    pub sigma: Q,
    pub eta: Q,
    pub p: Q,
    pub m: Q,
    pub sigma0: Q,
}

pub fn rows(columns: &[&str; 15]) -> Vec<Row> {
    let cols: Vec<Vec<Q>> = columns
        .iter()
        .map(|c| c.split(',').map(q).collect())
        .collect();
    let n = cols[0].len();
    (0..n)
        .map(|k| Row {
            a: cols[0][k].clone(),
            beta: cols[1][k].clone(),
            rho1: cols[2][k].clone(),
            rho2: cols[3][k].clone(),
            b1: cols[4][k].clone(),
            b2: cols[5][k].clone(),
            c: cols[6][k].clone(),
            xi: cols[7][k].clone(),
            delta: cols[8][k].clone(),
            alpha: cols[9][k].clone(),
            sigma: cols[10][k].clone(),
            eta: cols[11][k].clone(),
            p: cols[12][k].clone(),
            m: cols[13][k].clone(),
            sigma0: cols[14][k].clone(),
        })
        .collect()
}

/// Solves `pi Q = 0`, `sum pi = 1` exactly.
pub fn stationary(gen: &[Vec<Q>]) -> Vec<Q> {
    let n = gen.len();
    // rows of the augmented system: balance equations for columns 0..n-1,
    // normalisation replacing the last one
    let mut m: Vec<Vec<Q>> = (0..n)
        .map(|j| {
            let mut row: Vec<Q> = (0..n).map(|i| gen[i][j].clone()).collect();
            row.push(Q::zero());
            row
        })
        .collect();
    m[n - 1] = vec![Q::one(); n + 1];
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero()).expect("singular");
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for x in m[col].iter_mut() {
            *x = &*x / &p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..=n {
                    let v = &m[col][c] * &f;
                    m[r][c] = &m[r][c] - v;
                }
            }
        }
    }
    m.iter().map(|r| r[n].clone()).collect()
}

pub fn reference_stationary() -> Vec<Q> {
    let gen: Vec<Vec<Q>> = GENERATOR
        .iter()
        .map(|r| r.iter().map(|&v| qi(v)).collect())
        .collect();
    stationary(&gen)
}

fn min_by(rows: &[Row], f: impl Fn(&Row) -> &Q) -> Q {
    rows.iter().map(|r| f(r).clone()).min().unwrap()
}

fn max_by(rows: &[Row], f: impl Fn(&Row) -> &Q) -> Q {
    rows.iter().map(|r| f(r).clone()).max().unwrap()
}

#[derive(Debug, Clone)]
pub struct Exact {
    pub rs_star: Q,
    pub rtilde_star: Q,
    pub lambda: Q,
    pub psi1: Vec<Q>,
    pub psi2: Vec<Q>,
    pub psi3: Vec<Q>,
    pub bound_e: Q,
    pub bound_q: Q,
    pub bound_i: Q,
    pub lower: Q,
    pub upper: Q,
}

/// Every closed-form quantity, exactly, with `h'(0) = h_slope`.
pub fn evaluate(rows: &[Row], pi: &[Q], h_slope: &Q) -> Exact {
    let half = Q::new(BigInt::from(1), BigInt::from(2));
    let a_max = max_by(rows, |r| &r.a);
    let a_min = min_by(rows, |r| &r.a);
    let xi_min = min_by(rows, |r| &r.xi);
    let xi_max = max_by(rows, |r| &r.xi);
    let delta_max = max_by(rows, |r| &r.delta);
    let beta_max = max_by(rows, |r| &r.beta);
    let s0_min = min_by(rows, |r| &r.sigma0);
    let u = &a_max / &xi_min;

    let w1: Vec<Q> = rows
        .iter()
        .map(|r| (Q::one() - &r.rho1) * (Q::one() - &r.rho2))
        .collect();
    let w2: Vec<Q> = rows
        .iter()
        .map(|r| &r.b2 + &r.alpha + &r.sigma + &r.xi)
        .collect();
    let noise: Vec<Q> = rows
        .iter()
        .zip(&w1)
        .map(|(r, w)| &half * &r.sigma0 * &r.sigma0 * w * w * &u * &u)
        .collect();
    let c: Vec<Q> = w1
        .iter()
        .map(|w| &beta_max * w - &half * &s0_min * &s0_min * w * w * &u)
        .collect();
    let psi1: Vec<Q> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let bracket =
                Q::one() - &r.a * &xi_min / (&a_max * &r.xi) + &r.p * &r.m * h_slope / &r.xi;
            &c[k] * (&a_max * &a_max * &r.xi / (&r.a * &xi_min * &xi_min)) * bracket
        })
        .collect();
    let psi2: Vec<Q> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            &c[k] * (&a_max * &a_max / (&r.a * &xi_min * &xi_min)) * &beta_max * &w1[k]
        })
        .collect();
    let psi3: Vec<Q> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| &c[k] * &a_max / (&r.a * &xi_min))
        .collect();

    let sum = |f: &dyn Fn(usize) -> Q| -> Q {
        (0..rows.len()).fold(Q::zero(), |acc, k| acc + &pi[k] * f(k))
    };
    let num = sum(&|k| &rows[k].beta * &w1[k] * &u);
    let den = sum(&|k| &w2[k] + &noise[k]);
    let lambda = sum(&|k| &noise[k] + &w2[k] + &psi1[k]);
    let rtilde = &num / &lambda;
    let psi2_avg = sum(&|k| psi2[k].clone());

    let b2_min = min_by(rows, |r| &r.b2);
    let alpha_min = min_by(rows, |r| &r.alpha);
    let c_min = min_by(rows, |r| &r.c);
    let q_out = max_by(rows, |r| &r.b1) + max_by(rows, |r| &r.c) + &xi_max;
    let i_out = max_by(rows, |r| &r.eta) + &xi_max + &delta_max;
    let bound_e = &lambda * (&rtilde - Q::one()) / &psi2_avg;
    let bound_q = &b2_min * &bound_e / &q_out;
    let bound_i = (&alpha_min + &c_min * &b2_min / &q_out) * &bound_e / &i_out;

    Exact {
        rs_star: &num / &den,
        rtilde_star: rtilde,
        lambda,
        psi1,
        psi2,
        psi3,
        bound_e,
        bound_q,
        bound_i,
        lower: &a_min / (&xi_max + &delta_max),
        upper: u,
    }
}

/// Drift of the stochastic model with linear `h`, exactly.
pub fn drift(r: &Row, x: [&str; 5]) -> [Q; 5] {
    let [s, e, qq, i, rr] = x.map(q);
    let w1 = (Q::one() - &r.rho1) * (Q::one() - &r.rho2);
    let w2 = &r.b2 + &r.alpha + &r.sigma + &r.xi;
    let inf = &r.beta * &w1 * &s * &e;
    let pol = &r.p * &r.m * &s;
    [
        &r.a - &inf + &r.b1 * &qq - &r.xi * &s - &pol,
        &inf - &w2 * &e,
        &r.b2 * &e - (&r.b1 + &r.c + &r.xi) * &qq,
        &r.alpha * &e + &r.c * &qq - (&r.eta + &r.xi + &r.delta) * &i,
        &r.eta * &i + &r.sigma * &e - &r.xi * &rr + &pol,
    ]
}

pub fn rel_err(got: f64, want: &Q) -> f64 {
    let w = to_f64(want);
    if w == 0.0 {
        got.abs()
    } else {
        ((got - w) / w).abs()
    }
}

pub fn is_positive(x: &Q) -> bool {
    x.is_positive()
}
