//! Adaptive weights, zero-pilot exclusion and the thresholded bootstrap center.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, QuantileLevel};
use crate::error::{Error, Result};
use crate::solver::{self, FitResult, PenaltySpec, ZERO_CUTOFF};

/// Per-slope adaptive weights `|pilot_j|^-gamma`.
///
/// Slopes whose pilot is (numerically) zero carry an infinite weight; they are
/// listed in `excluded` and fixed at zero by [`fit_adaptive`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveWeights {
    /// Length `p`; entry `j - 1` belongs to slope `j`. Excluded entries are `+inf`.
    pub weights: Vec<f64>,
    /// Coefficient indices (1-based slope positions) with infinite weight.
    pub excluded: Vec<usize>,
    pub gamma: f64,
}

impl AdaptiveWeights {
    /// Coefficient indices that stay in the model, intercept first.
    pub fn kept_columns(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain((1..=self.weights.len()).filter(|j| !self.excluded.contains(j)))
            .collect()
    }
}

pub fn adaptive_weights(pilot: &[f64], gamma: f64) -> Result<AdaptiveWeights> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if pilot.is_empty() {
        return Err(Error::DimensionMismatch("pilot vector is empty".into()));
    }
    let mut weights = Vec::with_capacity(pilot.len() - 1);
    let mut excluded = Vec::new();
    for (j, b) in pilot.iter().enumerate().skip(1) {
        if b.abs() < ZERO_CUTOFF {
            excluded.push(j);
            weights.push(f64::INFINITY);
        } else {
            weights.push(b.abs().powf(-gamma));
        }
    }
    Ok(AdaptiveWeights {
        weights,
        excluded,
        gamma,
    })
}

/// Adaptive-L1 fit with excluded slopes removed from the design and reported as zero.
pub fn fit_adaptive(
    data: &Dataset,
    tau: QuantileLevel,
    lambda: f64,
    weights: &AdaptiveWeights,
) -> Result<FitResult> {
    if weights.weights.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} adaptive weights for {} slopes",
            weights.weights.len(),
            data.p()
        )));
    }
    let kept = weights.kept_columns();
    let reduced = if kept.len() == data.ncols() {
        None
    } else {
        Some(data.select_columns(&kept)?)
    };
    let sub = reduced.as_ref().unwrap_or(data);
    let penalty = PenaltySpec::AdaptiveLasso {
        lambda,
        gamma: weights.gamma,
        weights: kept[1..].iter().map(|&j| weights.weights[j - 1]).collect(),
    };
    let f = solver::fit(sub, tau, &penalty)?;
    if reduced.is_none() {
        return Ok(f);
    }
    let mut beta = vec![0.0; data.ncols()];
    for (pos, &j) in kept.iter().enumerate() {
        beta[j] = f.beta[pos];
    }
    let active_set = f.active_set.iter().map(|&pos| kept[pos]).collect();
    Ok(FitResult {
        beta,
        residuals: f.residuals,
        objective: f.objective,
        active_set,
        kkt_gap: f.kkt_gap,
        iterations: f.iterations,
    })
}

/// How the threshold `a_n` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    Fixed,
    RateN13,
    DataDriven,
}

/// A resolved threshold `a_n > 0` together with the rule that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSequence {
    pub a_n: f64,
    pub rule: ThresholdRule,
}

impl ThresholdSequence {
    pub fn fixed(a_n: f64) -> Result<Self> {
        Self::checked(a_n, ThresholdRule::Fixed)
    }

    /// `a_n = n^(-1/3)`.
    pub fn rate_n13(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be positive".into()));
        }
        Self::checked(1.0 / (n as f64).cbrt(), ThresholdRule::RateN13)
    }

    pub fn data_driven(a_n: f64) -> Result<Self> {
        Self::checked(a_n, ThresholdRule::DataDriven)
    }

    fn checked(a_n: f64, rule: ThresholdRule) -> Result<Self> {
        if a_n.is_finite() && a_n > 0.0 {
            Ok(Self { a_n, rule })
        } else {
            Err(Error::InvalidParameter(format!("threshold must be positive, got {a_n}")))
        }
    }
}

/// Which estimate supplies the thresholded slopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    #[default]
    Ordinary,
    Lasso,
}

/// Bootstrap center for the L1 bootstrap: ordinary intercept, slopes
/// `source_j * 1{|source_j| > a_n}`.
pub fn threshold_center(
    pilot_unpenalized: &[f64],
    lasso_fit: &[f64],
    a_n: &ThresholdSequence,
    source: ThresholdSource,
) -> Result<Vec<f64>> {
    if pilot_unpenalized.len() != lasso_fit.len() || pilot_unpenalized.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "ordinary estimate has {} coefficients, lasso estimate {}",
            pilot_unpenalized.len(),
            lasso_fit.len()
        )));
    }
    let src = match source {
        ThresholdSource::Ordinary => pilot_unpenalized,
        ThresholdSource::Lasso => lasso_fit,
    };
    let mut out = Vec::with_capacity(src.len());
    out.push(pilot_unpenalized[0]);
    out.extend(src[1..].iter().map(|&b| if b.abs() > a_n.a_n { b } else { 0.0 }));
    Ok(out)
}
