//! Wild residual bootstrap for adaptive-L1, thresholded L1 and unpenalized
//! quantile regression, plus percentile confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, QuantileLevel};
use crate::error::{Error, Result};
use crate::penalty::{self, ThresholdSequence, ThresholdSource};
use crate::rng;
use crate::solver::{self, PenaltySpec};
use crate::weights::WeightSampler;

pub const MIN_REPLICATES: usize = 100;
/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMethod {
    AdaptiveL1,
    ModifiedL1,
    Unpenalized,
}

/// Replicate coefficient vectors around a bootstrap center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDraws {
    /// Coefficients that generated the bootstrap responses.
    pub center: Vec<f64>,
    /// Point estimate the intervals are built around. Equal to `center`
    /// except for the modified L1 bootstrap, where it is the lasso fit.
    pub estimate: Vec<f64>,
    /// One row per converged replicate, in replicate-index order.
    pub draws: Vec<Vec<f64>>,
    pub n: usize,
    pub method: BootstrapMethod,
    pub requested: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub coefficient: usize,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `r_i |e_i|`.
pub fn wild_residuals(residuals: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    if residuals.len() != r.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} residuals but {} weights",
            residuals.len(),
            r.len()
        )));
    }
    Ok(residuals.iter().zip(r).map(|(e, w)| w * e.abs()).collect())
}

fn check_replicates(b: usize) -> Result<()> {
    if b < MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_REPLICATES} bootstrap replicates, got {b}"
        )));
    }
    Ok(())
}

/// Generates `Y* = X center + r o |resid|` per replicate and hands it to `refit`.
/// Replicate `b` always uses stream `(seed, b)`.
fn replicate<S, F>(
    data: &Dataset,
    center: &[f64],
    abs_residuals: &[f64],
    law: &S,
    b: usize,
    seed: u64,
    refit: F,
) -> Result<(Vec<Vec<f64>>, usize)>
where
    S: WeightSampler + Sync + ?Sized,
    F: Fn(&Dataset) -> Result<Vec<f64>> + Sync,
{
    let fitted = data.predict(center);
    let results: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|idx| {
            let mut s = rng::stream(seed, idx as u64);
            let r = law.sample(data.n(), &mut s);
            let y: Vec<f64> = fitted
                .iter()
                .zip(r.iter().zip(abs_residuals))
                .map(|(f, (w, e))| f + w * e)
                .collect();
            data.with_response(y).and_then(|d| refit(&d)).ok()
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    if failures as f64 > MAX_FAILURE_RATE * b as f64 {
        return Err(Error::TooManyFailures { failed: failures, total: b });
    }
    Ok((results.into_iter().flatten().collect(), failures))
}

/// Wild bootstrap of the adaptive-L1 estimator; weights are recomputed from an
/// unpenalized refit on every bootstrap sample, `lambda` and `gamma` are fixed.
pub fn bootstrap_adaptive<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    gamma: f64,
    law: &S,
    b: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    check_replicates(b)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    let adaptive_fit = |d: &Dataset| -> Result<solver::FitResult> {
        let pilot = solver::fit(d, tau, &PenaltySpec::None)?;
        let w = penalty::adaptive_weights(&pilot.beta, gamma)?;
        penalty::fit_adaptive(d, tau, lambda, &w)
    };
    let center_fit = adaptive_fit(data)?;
    let abs_res: Vec<f64> = center_fit.residuals.iter().map(|e| e.abs()).collect();
    let (draws, failures) = replicate(data, &center_fit.beta, &abs_res, law, b, seed, |d| {
        adaptive_fit(d).map(|f| f.beta)
    })?;
    Ok(BootstrapDraws {
        estimate: center_fit.beta.clone(),
        center: center_fit.beta,
        draws,
        n: data.n(),
        method: BootstrapMethod::AdaptiveL1,
        requested: b,
        failures,
    })
}

/// Modified wild bootstrap of the L1 estimator around the thresholded center.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_lasso<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    a_n: &ThresholdSequence,
    source: ThresholdSource,
    law: &S,
    b: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    check_replicates(b)?;
    let pen = PenaltySpec::Lasso { lambda };
    pen.validate(data.p())?;
    let ordinary = solver::fit(data, tau, &PenaltySpec::None)?;
    let lasso = solver::fit(data, tau, &pen)?;
    let center = penalty::threshold_center(&ordinary.beta, &lasso.beta, a_n, source)?;
    bootstrap_lasso_from(data, tau, lambda, center, lasso.beta, law, b, seed)
}

/// Modified L1 bootstrap from an already computed center and lasso estimate.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_lasso_from<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    center: Vec<f64>,
    estimate: Vec<f64>,
    law: &S,
    b: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    check_replicates(b)?;
    let pen = PenaltySpec::Lasso { lambda };
    pen.validate(data.p())?;
    let abs_res: Vec<f64> = data.residuals(&center).iter().map(|e| e.abs()).collect();
    let (draws, failures) = replicate(data, &center, &abs_res, law, b, seed, |d| {
        solver::fit(d, tau, &pen).map(|f| f.beta)
    })?;
    Ok(BootstrapDraws {
        center,
        estimate,
        draws,
        n: data.n(),
        method: BootstrapMethod::ModifiedL1,
        requested: b,
        failures,
    })
}

/// Residual treatment for the unpenalized wild bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualAdjustment {
    /// `r_i |e_i|`.
    #[default]
    None,
    /// `r_i |e_i + h_ii (tau - 1{e_i < 0}) / f(0)|`, the leverage-corrected
    /// residuals of the quantreg implementation.
    Leverage,
}

/// Diagonal of `X (X'X)^-1 X'`.
pub fn leverages(data: &Dataset) -> Result<Vec<f64>> {
    let k = data.ncols();
    let x = nalgebra::DMatrix::from_row_slice(data.n(), k, data.design());
    let chol = (x.transpose() * &x)
        .cholesky()
        .ok_or_else(|| Error::Singular("design matrix is rank deficient".into()))?;
    Ok((0..data.n())
        .map(|i| {
            let xi = x.row(i).transpose();
            xi.dot(&chol.solve(&xi))
        })
        .collect())
}

/// Gaussian kernel density of `values` at zero with bandwidth
/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn density_at_zero(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidParameter("density needs at least two values".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = empirical_quantile(&sorted, 0.75) - empirical_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if spread <= 0.0 {
        return Err(Error::Singular("residuals have no spread".into()));
    }
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * n as f64);
    Ok(norm * values.iter().map(|v| (-0.5 * (v / h).powi(2)).exp()).sum::<f64>())
}

/// Wild bootstrap of the ordinary quantile regression estimator.
pub fn bootstrap_unpenalized<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    law: &S,
    b: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    bootstrap_unpenalized_with(data, tau, law, b, seed, ResidualAdjustment::None)
}

pub fn bootstrap_unpenalized_with<S: WeightSampler + Sync + ?Sized>(
    data: &Dataset,
    tau: QuantileLevel,
    law: &S,
    b: usize,
    seed: u64,
    adjustment: ResidualAdjustment,
) -> Result<BootstrapDraws> {
    check_replicates(b)?;
    let center_fit = solver::fit(data, tau, &PenaltySpec::None)?;
    let abs_res: Vec<f64> = match adjustment {
        ResidualAdjustment::None => center_fit.residuals.iter().map(|e| e.abs()).collect(),
        ResidualAdjustment::Leverage => {
            let f0 = density_at_zero(&center_fit.residuals)?;
            let t = tau.value();
            leverages(data)?
                .iter()
                .zip(&center_fit.residuals)
                .map(|(h, e)| (e + h * (t - if *e < 0.0 { 1.0 } else { 0.0 }) / f0).abs())
                .collect()
        }
    };
    let (draws, failures) = replicate(data, &center_fit.beta, &abs_res, law, b, seed, |d| {
        solver::fit(d, tau, &PenaltySpec::None).map(|f| f.beta)
    })?;
    Ok(BootstrapDraws {
        estimate: center_fit.beta.clone(),
        center: center_fit.beta,
        draws,
        n: data.n(),
        method: BootstrapMethod::Unpenalized,
        requested: b,
        failures,
    })
}

/// Type-1 empirical quantile of ascending `sorted`: the `ceil(len q)`-th value.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let len = sorted.len();
    let k = ((len as f64 * q - 1e-9).ceil() as usize).clamp(1, len);
    sorted[k - 1]
}

/// Percentile intervals `[est_j - d(1-a/2)/sqrt(n), est_j - d(a/2)/sqrt(n)]`
/// where `d` are quantiles of `sqrt(n) (draw_j - center_j)`.
pub fn percentile_ci(draws: &BootstrapDraws, alpha: f64) -> Result<Vec<ConfidenceInterval>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if draws.draws.is_empty() {
        return Err(Error::InvalidParameter("no bootstrap draws".into()));
    }
    let k = draws.center.len();
    let root_n = (draws.n as f64).sqrt();
    (0..k)
        .map(|j| {
            let mut d: Vec<f64> = draws
                .draws
                .iter()
                .map(|row| root_n * (row[j] - draws.center[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            let lo_q = empirical_quantile(&d, alpha / 2.0);
            let hi_q = empirical_quantile(&d, 1.0 - alpha / 2.0);
            Ok(ConfidenceInterval {
                coefficient: j,
                lower: draws.estimate[j] - hi_q / root_n,
                upper: draws.estimate[j] - lo_q / root_n,
                level: 1.0 - alpha,
            })
        })
        .collect()
}
