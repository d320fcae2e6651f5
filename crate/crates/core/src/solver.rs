//! Check-loss minimization with optional weighted L1 penalties.
//!
//! Penalties enter as pseudo-observations: for each penalized slope `j` two
//! rows with response 0 and design `+-lambda w_j e_j` are appended, because
//! `rho_tau(u) + rho_tau(-u) = |u|`. The augmented problem is a plain
//! quantile regression solved by [`crate::lp`], then moved onto an optimal
//! vertex and certified through the subgradient optimality condition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset, QuantileLevel};
use crate::error::{Error, Result};
use crate::lp::{self, Rows};

/// Coefficients below this magnitude are reported as exact zeros.
pub const ZERO_CUTOFF: f64 = 1e-8;
/// Relative duality gap targeted by the interior point iteration.
pub const GAP_TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 200;
/// Scale factor of the KKT tolerance `KKT_FACTOR * n * max|x|`.
pub const KKT_FACTOR: f64 = 1e-6;
/// Residuals within this relative distance of zero count as interpolated.
const ZERO_RESIDUAL: f64 = 1e-9;

/// Check (pinball) loss `u (tau - 1{u < 0})`.
#[inline]
pub fn check_loss(u: f64, tau: QuantileLevel) -> f64 {
    let t = tau.value();
    if u < 0.0 {
        u * (t - 1.0)
    } else {
        u * t
    }
}

/// Sum of check losses of `y - X beta`.
pub fn check_loss_sum(data: &Dataset, tau: QuantileLevel, beta: &[f64]) -> f64 {
    data.residuals(beta).into_iter().map(|r| check_loss(r, tau)).sum()
}

/// Penalty applied to slopes `1..=p`. The intercept is never penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    None,
    Lasso { lambda: f64 },
    AdaptiveLasso { lambda: f64, gamma: f64, weights: Vec<f64> },
}

impl PenaltySpec {
    pub fn lambda(&self) -> f64 {
        match self {
            PenaltySpec::None => 0.0,
            PenaltySpec::Lasso { lambda } | PenaltySpec::AdaptiveLasso { lambda, .. } => *lambda,
        }
    }

    /// Effective per-slope multipliers `lambda * w_j`, length `p`.
    pub fn slope_multipliers(&self, p: usize) -> Vec<f64> {
        match self {
            PenaltySpec::None => vec![0.0; p],
            PenaltySpec::Lasso { lambda } => vec![*lambda; p],
            PenaltySpec::AdaptiveLasso { lambda, weights, .. } => {
                weights.iter().map(|w| lambda * w).collect()
            }
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if let PenaltySpec::AdaptiveLasso { gamma, weights, .. } = self {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
            }
            if weights.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "{} adaptive weights for {p} slopes",
                    weights.len()
                )));
            }
            if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "adaptive weights must be finite and positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// `lambda * sum_j w_j |beta_j|` over the slopes.
    pub fn value(&self, beta: &[f64]) -> f64 {
        let mult = self.slope_multipliers(beta.len() - 1);
        mult.iter().zip(&beta[1..]).map(|(m, b)| m * b.abs()).sum()
    }
}

/// A certified solution of a (possibly penalized) quantile regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub objective: f64,
    /// Indices (1-based slope positions in `beta`) of nonzero slopes.
    pub active_set: Vec<usize>,
    pub kkt_gap: f64,
    pub iterations: usize,
}

impl FitResult {
    /// Check-loss part of the objective.
    pub fn loss(&self, tau: QuantileLevel) -> f64 {
        self.residuals.iter().map(|r| check_loss(*r, tau)).sum()
    }
}

/// Full objective `sum rho_tau(y - X beta) + lambda sum w_j |beta_j|`.
pub fn objective(data: &Dataset, tau: QuantileLevel, penalty: &PenaltySpec, beta: &[f64]) -> f64 {
    check_loss_sum(data, tau, beta) + penalty.value(beta)
}

/// KKT tolerance used to accept a fit: `KKT_FACTOR * n * max|x|`.
pub fn kkt_tolerance(data: &Dataset) -> f64 {
    KKT_FACTOR * data.n() as f64 * data.max_abs_x()
}

/// Data rows followed by the penalty pseudo-rows.
struct Augmented {
    x: Vec<f64>,
    y: Vec<f64>,
    k: usize,
}

impl Augmented {
    fn build(data: &Dataset, penalty: &PenaltySpec) -> Self {
        let k = data.ncols();
        let mult = penalty.slope_multipliers(data.p());
        let extra = mult.iter().filter(|m| **m > 0.0).count();
        let mut x = Vec::with_capacity((data.n() + 2 * extra) * k);
        let mut y = Vec::with_capacity(data.n() + 2 * extra);
        x.extend_from_slice(data.design());
        y.extend_from_slice(data.y());
        for (j, &m) in mult.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; k];
                row[j + 1] = sign * m;
                x.extend_from_slice(&row);
                y.push(0.0);
            }
        }
        Self { x, y, k }
    }

    fn rows(&self) -> Rows<'_> {
        Rows {
            x: &self.x,
            y: &self.y,
            k: self.k,
        }
    }
}

fn validate_inputs(data: &Dataset, penalty: &PenaltySpec) -> Result<()> {
    penalty.validate(data.p())?;
    if data.n() < data.ncols() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "need at least p + 2 = {} observations, have {}",
            data.ncols() + 1,
            data.n()
        )));
    }
    Ok(())
}

/// Minimizes `sum_i rho_tau(y_i - x_i'beta) + lambda sum_j w_j |beta_j|`.
pub fn fit(data: &Dataset, tau: QuantileLevel, penalty: &PenaltySpec) -> Result<FitResult> {
    validate_inputs(data, penalty)?;
    let aug = Augmented::build(data, penalty);
    let rows = aug.rows();
    let t = tau.value();
    let sol = lp::solve(&rows, t, GAP_TOLERANCE, MAX_ITERATIONS)?;
    let tol = kkt_tolerance(data);

    let ipm_beta = zero_small(sol.beta.clone());
    let ipm_obj = objective(data, tau, penalty, &ipm_beta);

    let mut last_kkt = f64::INFINITY;
    if let Some(vertex) = purify(&rows, &sol.beta) {
        let vertex = zero_small(vertex);
        let obj = objective(data, tau, penalty, &vertex);
        if obj <= ipm_obj + GAP_TOLERANCE * (1.0 + ipm_obj.abs()) {
            let kkt = kkt_distance(&rows, &vertex, t);
            if kkt <= tol {
                return Ok(finish(data, tau, penalty, vertex, kkt, sol.iterations));
            }
            last_kkt = kkt;
        }
    }
    if sol.converged {
        let kkt = kkt_distance(&rows, &ipm_beta, t);
        if kkt <= tol {
            return Ok(finish(data, tau, penalty, ipm_beta, kkt, sol.iterations));
        }
        last_kkt = last_kkt.min(kkt);
    }
    Err(Error::NotConverged {
        iterations: sol.iterations,
        gap: sol.gap,
        kkt: last_kkt,
    })
}

fn zero_small(mut beta: Vec<f64>) -> Vec<f64> {
    for b in beta.iter_mut() {
        if b.abs() < ZERO_CUTOFF {
            *b = 0.0;
        }
    }
    beta
}

fn finish(
    data: &Dataset,
    tau: QuantileLevel,
    penalty: &PenaltySpec,
    beta: Vec<f64>,
    kkt_gap: f64,
    iterations: usize,
) -> FitResult {
    let residuals = data.residuals(&beta);
    let objective = objective(data, tau, penalty, &beta);
    let active_set = (1..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    FitResult {
        beta,
        residuals,
        objective,
        active_set,
        kkt_gap,
        iterations,
    }
}

/// Moves an interior solution onto a vertex: picks the `k` linearly independent
/// rows closest to interpolation and solves them exactly.
fn purify(rows: &Rows, beta: &[f64]) -> Option<Vec<f64>> {
    let k = rows.k;
    let m = rows.m();
    let mut scored: Vec<(f64, usize)> = (0..m)
        .filter_map(|i| {
            let xi = rows.row(i);
            let norm = dot(xi, xi).sqrt();
            (norm > 0.0).then(|| ((rows.y[i] - dot(xi, beta)).abs() / norm, i))
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = Vec::with_capacity(k);
    for &(_, i) in &scored {
        let xi = rows.row(i);
        let norm = dot(xi, xi).sqrt();
        let mut v = xi.to_vec();
        for q in &basis {
            let c = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let rn = dot(&v, &v).sqrt();
        if rn > 1e-9 * norm {
            v.iter_mut().for_each(|a| *a /= rn);
            basis.push(v);
            chosen.push(i);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return None;
    }
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for (r, &i) in chosen.iter().enumerate() {
        for (c, v) in rows.row(i).iter().enumerate() {
            a[(r, c)] = *v;
        }
        b[r] = rows.y[i];
    }
    let sol = a.lu().solve(&b)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

#[inline]
fn psi(r: f64, tau: f64) -> f64 {
    if r < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

/// Max-norm of the minimum-Euclidean-norm element of the subdifferential of the
/// (augmented, unpenalized) objective at `beta`.
fn kkt_distance(rows: &Rows, beta: &[f64], tau: f64) -> f64 {
    let k = rows.k;
    let mut grad = vec![0.0; k];
    let mut free: Vec<usize> = Vec::new();
    for i in 0..rows.m() {
        let xi = rows.row(i);
        let fitted = dot(xi, beta);
        let r = rows.y[i] - fitted;
        let scale = 1.0 + rows.y[i].abs() + xi.iter().zip(beta).map(|(a, b)| (a * b).abs()).sum::<f64>();
        if r.abs() <= ZERO_RESIDUAL * scale {
            free.push(i);
        } else {
            let s = psi(r, tau);
            grad.iter_mut().zip(xi).for_each(|(g, x)| *g -= x * s);
        }
    }
    // The subdifferential is grad - sum_{i in free} x_i v_i with v_i in [tau-1, tau].
    let (lo, hi) = (tau - 1.0, tau);
    let mut v = vec![0.0; free.len()];

    if free.len() == k {
        let mut a = DMatrix::zeros(k, k);
        for (c, &i) in free.iter().enumerate() {
            for (r, x) in rows.row(i).iter().enumerate() {
                a[(r, c)] = *x;
            }
        }
        if let Some(sol) = a.lu().solve(&DVector::from_column_slice(&grad)) {
            for (vi, s) in v.iter_mut().zip(sol.iter()) {
                *vi = s.clamp(lo, hi);
            }
        }
    }

    let mut res = grad.clone();
    for (vi, &i) in v.iter().zip(&free) {
        res.iter_mut().zip(rows.row(i)).for_each(|(r, x)| *r -= x * vi);
    }
    let norms: Vec<f64> = free.iter().map(|&i| dot(rows.row(i), rows.row(i))).collect();
    let inf_norm = |res: &[f64]| res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if inf_norm(&res) > 0.0 && !free.is_empty() {
        // Projected coordinate descent on the box-constrained least squares.
        let start = inf_norm(&res).max(1.0);
        for _ in 0..20_000 {
            let mut moved = 0.0f64;
            for (idx, &i) in free.iter().enumerate() {
                if norms[idx] == 0.0 {
                    continue;
                }
                let xi = rows.row(i);
                let nv = (v[idx] + dot(xi, &res) / norms[idx]).clamp(lo, hi);
                let delta = nv - v[idx];
                if delta != 0.0 {
                    res.iter_mut().zip(xi).for_each(|(r, x)| *r -= x * delta);
                    v[idx] = nv;
                    moved = moved.max(delta.abs() * norms[idx].sqrt());
                }
            }
            if moved <= 1e-15 * start {
                break;
            }
        }
    }
    inf_norm(&res)
}

/// Distance from zero to the subdifferential of the objective at `fit.beta`,
/// reported in max-norm over coordinates.
pub fn kkt_residual(
    fit: &FitResult,
    data: &Dataset,
    tau: QuantileLevel,
    penalty: &PenaltySpec,
) -> Result<f64> {
    penalty.validate(data.p())?;
    if fit.beta.len() != data.ncols() || fit.residuals.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} coefficients and {} residuals; data has {} columns and {} rows",
            fit.beta.len(),
            fit.residuals.len(),
            data.ncols(),
            data.n()
        )));
    }
    let aug = Augmented::build(data, penalty);
    Ok(kkt_distance(&aug.rows(), &fit.beta, tau.value()))
}

/// Axis-aligned grid for [`brute_force_fit`].
#[derive(Debug, Clone)]
pub struct Grid {
    pub bounds: Vec<(f64, f64)>,
    pub step: f64,
    pub max_cells: u128,
}

impl Grid {
    pub const DEFAULT_MAX_CELLS: u128 = 200_000_000;

    pub fn new(bounds: Vec<(f64, f64)>, step: f64) -> Self {
        Self {
            bounds,
            step,
            max_cells: Self::DEFAULT_MAX_CELLS,
        }
    }

    fn points_per_axis(&self) -> Vec<usize> {
        self.bounds
            .iter()
            .map(|(lo, hi)| ((hi - lo) / self.step + 1e-9).floor() as usize + 1)
            .collect()
    }
}

/// Exhaustive grid minimization of the exact objective, for `p + 1 <= 3`.
/// Ties go to the lexicographically smallest grid point.
pub fn brute_force_fit(
    data: &Dataset,
    tau: QuantileLevel,
    penalty: &PenaltySpec,
    grid: &Grid,
) -> Result<Vec<f64>> {
    penalty.validate(data.p())?;
    let k = data.ncols();
    if k > 3 {
        return Err(Error::InvalidParameter(format!(
            "grid search supports at most 3 coefficients, got {k}"
        )));
    }
    if grid.bounds.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} box intervals for {k} coefficients",
            grid.bounds.len()
        )));
    }
    if !(grid.step.is_finite() && grid.step > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {}", grid.step)));
    }
    if grid
        .bounds
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return Err(Error::InvalidParameter("grid box must be finite with lo <= hi".into()));
    }
    let counts = grid.points_per_axis();
    let cells: u128 = counts.iter().map(|&c| c as u128).product();
    if cells > grid.max_cells {
        return Err(Error::GridTooLarge {
            cells,
            cap: grid.max_cells,
        });
    }

    let mut idx = vec![0usize; k];
    let mut beta = vec![0.0; k];
    let mut best = vec![0.0; k];
    let mut best_obj = f64::INFINITY;
    loop {
        for j in 0..k {
            beta[j] = grid.bounds[j].0 + idx[j] as f64 * grid.step;
        }
        let obj = objective(data, tau, penalty, &beta);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&beta);
        }
        // Odometer increment, last coordinate fastest.
        let mut j = k;
        loop {
            if j == 0 {
                return Ok(best);
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}
