//! Continuous-time Markov regime process.
//!
//! A [`Generator`] is a validated Q-matrix over the finite regime set
//! `{0, .., N-1}` (printed as `1..=N` in files and reports). From it we get
//! the stationary law, the transition matrix `exp(dt * Q)`, and two ways of
//! sampling a right-continuous regime path:
//!
//! * exact event-driven sampling from exponential holding times, and
//! * grid sampling, one draw per step from the rows of `exp(dt * Q)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row-sum deviation absorbed into the diagonal during validation.
pub const ROW_SUM_REPAIR_TOL: f64 = 1e-9;

/// `dt * max|q_ii|` above which the grid sampler logs a warning.
pub const STEP_WARN_RATIO: f64 = 0.1;

/// `dt * max|q_ii|` above which the grid sampler refuses to run.
pub const STEP_MAX_RATIO: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("generator must be a non-empty square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("generator entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("negative off-diagonal rate q[{row}][{col}] = {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum:e}, exceeding tolerance {ROW_SUM_REPAIR_TOL:e}")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("generator is reducible: state {to} is not reachable from state {from}")]
    ReducibleChain { from: usize, to: usize },
    #[error("stationary system is singular")]
    SingularSystem,
    #[error("state {state} is absorbing")]
    AbsorbingState { state: usize },
    #[error("regime {state} out of range for a {n_states}-state chain")]
    InvalidState { state: usize, n_states: usize },
    #[error("step {dt} too large: dt * max|q_ii| = {ratio} > {STEP_MAX_RATIO}")]
    StepTooLarge { dt: f64, ratio: f64 },
    #[error("invalid time argument: {0}")]
    InvalidTime(String),
}

/// Validated infinitesimal generator of the regime chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    rates: DMatrix<f64>,
}

impl Generator {
    /// Validates a row-major rate matrix.
    ///
    /// Off-diagonal rates must be non-negative. The diagonal is recomputed as
    /// the negated off-diagonal row sum when the supplied row sums to within
    /// [`ROW_SUM_REPAIR_TOL`] of zero; anything larger is rejected. The
    /// off-diagonal support must form a single communicating class.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, ChainError> {
        let n = rows.len();
        if n == 0 {
            return Err(ChainError::NotSquare { rows: 0, cols: 0 });
        }
        for row in rows {
            if row.len() != n {
                return Err(ChainError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        let mut rates = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            let mut off = 0.0;
            for (j, &q) in row.iter().enumerate() {
                if !q.is_finite() {
                    return Err(ChainError::NonFinite { row: i, col: j });
                }
                if i != j {
                    if q < 0.0 {
                        return Err(ChainError::NegativeOffDiagonal {
                            row: i,
                            col: j,
                            value: q,
                        });
                    }
                    off += q;
                    rates[(i, j)] = q;
                }
            }
            let sum = off + row[i];
            if sum.abs() > ROW_SUM_REPAIR_TOL {
                return Err(ChainError::RowSumViolation { row: i, sum });
            }
            rates[(i, i)] = -off;
        }
        check_irreducible(&rates)?;
        Ok(Self { rates })
    }

    pub fn from_matrix(rates: &DMatrix<f64>) -> Result<Self, ChainError> {
        let rows: Vec<Vec<f64>> = rates
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        if rates.nrows() != rates.ncols() {
            return Err(ChainError::NotSquare {
                rows: rates.nrows(),
                cols: rates.ncols(),
            });
        }
        Self::new(&rows)
    }

    /// Single-state chain (no switching).
    pub fn single() -> Self {
        Self {
            rates: DMatrix::zeros(1, 1),
        }
    }

    pub fn n_states(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    /// Total exit rate `-q_ii` of a state.
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.rates[(state, state)]
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n_states())
            .map(|i| self.exit_rate(i))
            .fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rates
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    fn check_state(&self, state: usize) -> Result<(), ChainError> {
        if state >= self.n_states() {
            return Err(ChainError::InvalidState {
                state,
                n_states: self.n_states(),
            });
        }
        Ok(())
    }
}

fn reachable(rates: &DMatrix<f64>, start: usize, transpose: bool) -> Vec<bool> {
    let n = rates.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let q = if transpose { rates[(j, i)] } else { rates[(i, j)] };
            if i != j && q > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn check_irreducible(rates: &DMatrix<f64>) -> Result<(), ChainError> {
    // Strongly connected iff state 0 reaches everything and everything reaches 0.
    if let Some(to) = reachable(rates, 0, false).iter().position(|&s| !s) {
        return Err(ChainError::ReducibleChain { from: 0, to });
    }
    if let Some(from) = reachable(rates, 0, true).iter().position(|&s| !s) {
        return Err(ChainError::ReducibleChain { from, to: 0 });
    }
    Ok(())
}

/// Probability vector `pi` with `pi Q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryDistribution {
    probabilities: Vec<f64>,
}

impl StationaryDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probabilities[k]
    }

    /// `max_j |(pi Q)_j|`.
    pub fn residual(&self, g: &Generator) -> f64 {
        let n = g.n_states();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| self.probabilities[i] * g.rate(i, j))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.probabilities
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Solves `pi Q = 0`, `sum(pi) = 1`.
///
/// The last balance equation of `Q^T pi^T = 0` is replaced by the
/// normalisation row, and the square system is solved by LU with one round
/// of iterative refinement.
pub fn stationary_distribution(g: &Generator) -> Result<StationaryDistribution, ChainError> {
    let n = g.n_states();
    let mut a = g.rates().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(ChainError::SingularSystem)?;
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(ChainError::SingularSystem);
    }
    let total: f64 = x.iter().sum();
    Ok(StationaryDistribution {
        probabilities: x.iter().map(|p| p / total).collect(),
    })
}

/// `exp(dt * Q)` by scaling and squaring.
///
/// Uses the uniformised form `exp(dt Q) = exp(-lambda dt) exp(dt (Q + lambda I))`
/// with `lambda = max|q_ii|`, so every Taylor term is entrywise non-negative
/// and the result cannot pick up negative round-off entries.
pub fn transition_matrix(g: &Generator, dt: f64) -> Result<DMatrix<f64>, ChainError> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(ChainError::InvalidTime(format!("dt must be >= 0, got {dt}")));
    }
    let n = g.n_states();
    let lambda = g.max_exit_rate();
    let shifted = g.rates() + DMatrix::identity(n, n) * lambda;
    let norm = lambda * dt * 2.0;
    // Scale so the shifted argument has norm <= 1/2.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = dt / f64::from(2u32.pow(squarings));
    let arg = &shifted * scale;

    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &arg / f64::from(k);
        sum += &term;
        if term.amax() <= f64::EPSILON * 1e-3 {
            break;
        }
    }
    sum *= (-lambda * scale).exp();
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Piecewise-constant regime path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    jump_times: Vec<f64>,
    regimes: Vec<usize>,
    horizon: f64,
    n_states: usize,
}

impl RegimePath {
    /// Builds a path from segment start times and regimes.
    ///
    /// `jump_times[0]` must be `0`, times strictly increasing and below the
    /// horizon, consecutive regimes distinct.
    pub fn new(
        jump_times: Vec<f64>,
        regimes: Vec<usize>,
        horizon: f64,
        n_states: usize,
    ) -> Result<Self, ChainError> {
        if jump_times.is_empty() || jump_times.len() != regimes.len() || jump_times[0] != 0.0 {
            return Err(ChainError::InvalidTime(
                "path needs one start time per regime, starting at 0".into(),
            ));
        }
        if jump_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ChainError::InvalidTime("jump times must increase".into()));
        }
        if *jump_times.last().unwrap() > horizon {
            return Err(ChainError::InvalidTime("jump after horizon".into()));
        }
        if regimes.windows(2).any(|w| w[0] == w[1]) {
            return Err(ChainError::InvalidTime(
                "consecutive regimes must differ".into(),
            ));
        }
        if let Some(&bad) = regimes.iter().find(|&&r| r >= n_states) {
            return Err(ChainError::InvalidState {
                state: bad,
                n_states,
            });
        }
        Ok(Self {
            jump_times,
            regimes,
            horizon,
            n_states,
        })
    }

    pub fn constant(regime: usize, horizon: f64, n_states: usize) -> Self {
        Self {
            jump_times: vec![0.0],
            regimes: vec![regime],
            horizon,
            n_states,
        }
    }

    fn push(&mut self, t: f64, regime: usize) {
        if regime != *self.regimes.last().unwrap() {
            self.jump_times.push(t);
            self.regimes.push(regime);
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn regimes(&self) -> &[usize] {
        &self.regimes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_jumps(&self) -> usize {
        self.regimes.len() - 1
    }

    /// Regime in force at time `t` (right-continuous).
    pub fn regime_at(&self, t: f64) -> usize {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        self.regimes[idx.saturating_sub(1)]
    }

    /// Forward-only lookup for monotone time queries.
    pub fn cursor(&self) -> PathCursor<'_> {
        PathCursor { path: self, next: 1 }
    }
}

/// Amortised O(1) regime lookup for non-decreasing query times.
pub struct PathCursor<'a> {
    path: &'a RegimePath,
    next: usize,
}

impl PathCursor<'_> {
    pub fn regime_at(&mut self, t: f64) -> usize {
        let times = &self.path.jump_times;
        while self.next < times.len() && times[self.next] <= t {
            self.next += 1;
        }
        self.path.regimes[self.next - 1]
    }
}

fn check_horizon(horizon: f64) -> Result<(), ChainError> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(ChainError::InvalidTime(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    Ok(())
}

/// Picks index `j` with probability `weights[j] / total`.
fn pick<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64>, total: f64) -> Option<usize> {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (j, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(j);
        if u < acc {
            return Some(j);
        }
    }
    last
}

/// Exact event-driven sampling: hold in `i` for `Exp(-q_ii)`, then jump to
/// `j` with probability `q_ij / -q_ii`.
pub fn sample_path_exact<R: Rng + ?Sized>(
    g: &Generator,
    r0: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<RegimePath, ChainError> {
    g.check_state(r0)?;
    check_horizon(horizon)?;
    let n = g.n_states();
    let mut path = RegimePath::constant(r0, horizon, n);
    if n == 1 {
        return Ok(path);
    }
    let mut t = 0.0;
    let mut state = r0;
    loop {
        let rate = g.exit_rate(state);
        if rate <= 0.0 {
            return Err(ChainError::AbsorbingState { state });
        }
        let hold = Exp::new(rate).expect("positive rate").sample(rng);
        t += hold;
        if t >= horizon {
            break;
        }
        let next = pick(
            rng,
            (0..n).map(|j| if j == state { 0.0 } else { g.rate(state, j) }),
            rate,
        )
        .ok_or(ChainError::AbsorbingState { state })?;
        path.push(t, next);
        state = next;
    }
    Ok(path)
}

/// Number of grid steps covering `[0, horizon]` with step `dt`; the last step
/// may be shorter than `dt`.
pub fn grid_steps(horizon: f64, dt: f64) -> usize {
    if horizon <= 0.0 {
        return 0;
    }
    let ratio = horizon / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Grid time of step `n`, clipped to the horizon.
pub fn grid_time(n: usize, dt: f64, horizon: f64) -> f64 {
    (n as f64 * dt).min(horizon)
}

/// Grid sampling: at each grid point the next regime is drawn from the
/// current regime's row of `exp(dt Q)`; the path is constant in between.
pub fn sample_path_discretized<R: Rng + ?Sized>(
    g: &Generator,
    r0: usize,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<RegimePath, ChainError> {
    g.check_state(r0)?;
    check_horizon(horizon)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ChainError::InvalidTime(format!("dt must be > 0, got {dt}")));
    }
    let ratio = dt * g.max_exit_rate();
    if ratio > STEP_MAX_RATIO {
        return Err(ChainError::StepTooLarge { dt, ratio });
    }
    if ratio > STEP_WARN_RATIO {
        log::warn!("coarse regime grid: dt * max|q_ii| = {ratio:.3}");
    }
    let n = g.n_states();
    let mut path = RegimePath::constant(r0, horizon, n);
    if n == 1 {
        return Ok(path);
    }
    let p = transition_matrix(g, dt)?;
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            (0..n)
                .map(|j| {
                    acc += p[(i, j)];
                    acc
                })
                .collect()
        })
        .collect();
    let steps = grid_steps(horizon, dt);
    let mut state = r0;
    // The draw at grid point `k` sets the regime for [t_k, t_{k+1}); no draw
    // is needed at the final grid point.
    for k in 1..steps {
        let row = &cumulative[state];
        let u = rng.random::<f64>() * row[n - 1];
        let next = row.iter().position(|&c| u < c).unwrap_or(n - 1);
        if next != state {
            path.push(grid_time(k, dt, horizon), next);
            state = next;
        }
    }
    Ok(path)
}

/// Fraction of `[0, horizon]` spent in each regime.
pub fn occupancy(path: &RegimePath) -> Vec<f64> {
    let mut out = vec![0.0; path.n_states];
    if path.horizon <= 0.0 {
        out[path.regimes[0]] = 1.0;
        return out;
    }
    for (idx, &regime) in path.regimes.iter().enumerate() {
        let start = path.jump_times[idx];
        let end = path
            .jump_times
            .get(idx + 1)
            .copied()
            .unwrap_or(path.horizon);
        out[regime] += end - start;
    }
    out.iter_mut().for_each(|x| *x /= path.horizon);
    out
}
