//! Penalty-level selection: BIC for adaptive L1, K-fold cross-validation for
//! L1, and bootstrap-MSE selection of the threshold `a_n`.
//!
//! All selectors break ties toward more regularization.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bootstrap;
use crate::data::{Dataset, QuantileLevel};
use crate::error::{Error, Result};
use crate::penalty::{self, ThresholdSequence, ThresholdSource};
use crate::rng;
use crate::solver::{self, check_loss, PenaltySpec};
use crate::weights::WeightSampler;

pub const DEFAULT_GRID_SIZE: usize = 30;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_AN_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_B_SMALL: usize = 100;

/// Strictly increasing, strictly positive penalty levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("lambda grid is empty".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("lambda grid values must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("lambda grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `size` log-spaced values from `lo` to `hi`.
    pub fn log_spaced(lo: f64, hi: f64, size: usize) -> Result<Self> {
        if size < 2 || !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "log grid needs 0 < lo < hi and at least 2 points (lo {lo}, hi {hi}, size {size})"
            )));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / (size - 1) as f64;
        let mut values: Vec<f64> = (0..size).map(|i| (a + step * i as f64).exp()).collect();
        values[0] = lo;
        values[size - 1] = hi;
        Self::new(values)
    }

    /// 30 values from `0.01 lambda_ref` to `10 lambda_ref`, with
    /// `lambda_ref = sqrt(n max(ln p, 1))`.
    pub fn default_for(n: usize, p: usize) -> Result<Self> {
        let lref = (n as f64 * (p.max(1) as f64).ln().max(1.0)).sqrt();
        Self::log_spaced(0.01 * lref, 10.0 * lref, DEFAULT_GRID_SIZE)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicRow {
    pub lambda: f64,
    pub loss: f64,
    pub df: usize,
    pub bic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    /// Mean held-out check loss per observation.
    pub cv_loss: f64,
    pub converged: bool,
}

/// Index of the minimum, preferring the later entry on ties.
fn argmin_last<I: IntoIterator<Item = Option<f64>>>(scores: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if let Some(v) = s {
            if best.is_none_or(|(_, b)| v <= b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// `log(sum rho_tau) + |active| log(n) / (2n)` over the grid of adaptive-L1 fits.
pub fn bic_select(
    data: &Dataset,
    tau: QuantileLevel,
    gamma: f64,
    grid: &LambdaGrid,
) -> Result<(f64, Vec<BicRow>)> {
    let pilot = solver::fit(data, tau, &PenaltySpec::None)?;
    let weights = penalty::adaptive_weights(&pilot.beta, gamma)?;
    let n = data.n() as f64;
    let rows: Vec<BicRow> = grid
        .values()
        .iter()
        .map(|&lambda| match penalty::fit_adaptive(data, tau, lambda, &weights) {
            Ok(f) => {
                let loss = f.loss(tau);
                let df = f.active_set.len();
                BicRow {
                    lambda,
                    loss,
                    df,
                    bic: loss.max(f64::MIN_POSITIVE).ln() + df as f64 * n.ln() / (2.0 * n),
                    converged: true,
                }
            }
            Err(_) => BicRow {
                lambda,
                loss: f64::NAN,
                df: 0,
                bic: f64::NAN,
                converged: false,
            },
        })
        .collect();
    let best = argmin_last(rows.iter().map(|r| r.converged.then_some(r.bic)))
        .ok_or_else(|| Error::Aborted("every fit on the lambda grid failed".into()))?;
    Ok((rows[best].lambda, rows))
}

/// Seeded balanced fold labels in `0..k`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, 0));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// K-fold cross-validation of the lasso penalty with seeded folds.
pub fn cv_select(
    data: &Dataset,
    tau: QuantileLevel,
    grid: &LambdaGrid,
    k: usize,
    seed: u64,
) -> Result<(f64, Vec<CvRow>)> {
    if k < 2 || data.n() < 2 * k {
        return Err(Error::InvalidParameter(format!(
            "cross-validation needs K >= 2 and n >= 2K (K {k}, n {})",
            data.n()
        )));
    }
    cv_select_with_folds(data, tau, grid, &fold_assignment(data.n(), k, seed))
}

/// Cross-validation with explicit fold labels.
pub fn cv_select_with_folds(
    data: &Dataset,
    tau: QuantileLevel,
    grid: &LambdaGrid,
    folds: &[usize],
) -> Result<(f64, Vec<CvRow>)> {
    if folds.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} fold labels for {} rows",
            folds.len(),
            data.n()
        )));
    }
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut splits = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
        if test.is_empty() || train.len() < data.ncols() + 1 {
            return Err(Error::InvalidParameter(format!(
                "fold {f} leaves {} training rows for {} coefficients",
                train.len(),
                data.ncols()
            )));
        }
        splits.push((data.select_rows(&train), data.select_rows(&test)));
    }
    let rows: Vec<CvRow> = grid
        .values()
        .iter()
        .map(|&lambda| {
            let pen = PenaltySpec::Lasso { lambda };
            let mut total = 0.0;
            for (train, test) in &splits {
                match solver::fit(train, tau, &pen) {
                    Ok(f) => {
                        total += test
                            .residuals(&f.beta)
                            .into_iter()
                            .map(|r| check_loss(r, tau))
                            .sum::<f64>()
                    }
                    Err(_) => {
                        return CvRow {
                            lambda,
                            cv_loss: f64::NAN,
                            converged: false,
                        }
                    }
                }
            }
            CvRow {
                lambda,
                cv_loss: total / data.n() as f64,
                converged: true,
            }
        })
        .collect();
    let best = argmin_last(rows.iter().map(|r| r.converged.then_some(r.cv_loss)))
        .ok_or_else(|| Error::Aborted("every fit on the lambda grid failed".into()))?;
    Ok((rows[best].lambda, rows))
}

/// Picks the threshold minimizing the bootstrap estimate of
/// `E* ||beta** - beta*||^2`.
#[allow(clippy::too_many_arguments)]
pub fn select_a_n<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    candidates: &[f64],
    law: &S,
    b_small: usize,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    select_a_n_with(data, tau, lambda, candidates, law, b_small, seed, ThresholdSource::Ordinary)
}

/// [`select_a_n`] with an explicit threshold source.
#[allow(clippy::too_many_arguments)]
pub fn select_a_n_with<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    candidates: &[f64],
    law: &S,
    b_small: usize,
    seed: u64,
    source: ThresholdSource,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if candidates.is_empty() || candidates.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::InvalidParameter("threshold candidates must be nonempty and positive".into()));
    }
    let ordinary = solver::fit(data, tau, &PenaltySpec::None)?;
    let lasso = solver::fit(data, tau, &PenaltySpec::Lasso { lambda })?;
    let mut table = Vec::with_capacity(candidates.len());
    for &a in candidates {
        let seq = ThresholdSequence::data_driven(a)?;
        let center = penalty::threshold_center(&ordinary.beta, &lasso.beta, &seq, source)?;
        let draws = bootstrap::bootstrap_lasso_from(
            data,
            tau,
            lambda,
            center.clone(),
            lasso.beta.clone(),
            law,
            b_small,
            seed,
        )?;
        let mse = draws
            .draws
            .iter()
            .map(|row| row.iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum::<f64>())
            .sum::<f64>()
            / draws.draws.len() as f64;
        table.push((a, mse));
    }
    // Ties go to the largest threshold regardless of candidate order.
    let mut best = 0;
    for (i, &(a, m)) in table.iter().enumerate() {
        let (ba, bm) = table[best];
        if m < bm || (m == bm && a > ba) {
            best = i;
        }
    }
    Ok((table[best].0, table))
}

/// Default threshold candidates `{0.25, 0.5, 1, 2, 4} n^(-1/3)`.
pub fn default_a_n_candidates(n: usize) -> Vec<f64> {
    let base = 1.0 / (n as f64).cbrt();
    DEFAULT_AN_MULTIPLIERS.iter().map(|m| m * base).collect()
}
