//! The heteroscedastic simulation design
//! `Y = 0.25 X3 + 0.5 X5 + X7 + 2 X9 + X1 xi` with `X1 = Phi(Z1)` and
//! `Xj = Zj` otherwise.
//!
//! The error scale is `scale_offset + X1`; the standard design has offset 0.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, QuantileLevel};
use crate::error::{Error, Result};
use crate::rng;

pub const NUM_SLOPES: usize = 10;
pub const MIN_N: usize = 30;
/// Location slopes of the standard design, `beta_1 .. beta_10`.
pub const PAPER_LOCATION: [f64; NUM_SLOPES] = [0.0, 0.0, 0.25, 0.0, 0.5, 0.0, 1.0, 0.0, 2.0, 0.0];
/// Slopes reported individually in the coverage table.
pub const HEADLINE: [usize; 5] = [1, 3, 5, 7, 9];

pub(crate) fn std_normal() -> Normal {
    Normal::standard()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperDesign {
    pub n: usize,
    pub tau: QuantileLevel,
    /// Conditional-quantile coefficients at `tau`, intercept first.
    pub true_beta: Vec<f64>,
    /// Location slopes; the intercept of the location part is zero.
    pub location: Vec<f64>,
    pub scale_offset: f64,
}

impl PaperDesign {
    pub fn new(n: usize, tau: QuantileLevel) -> Result<Self> {
        Self::custom(n, tau, PAPER_LOCATION.to_vec(), 0.0)
    }

    /// Same covariates with other location slopes and error scale `offset + X1`.
    pub fn custom(n: usize, tau: QuantileLevel, location: Vec<f64>, scale_offset: f64) -> Result<Self> {
        if n < MIN_N {
            return Err(Error::InvalidParameter(format!("design needs n >= {MIN_N}, got {n}")));
        }
        if location.len() != NUM_SLOPES {
            return Err(Error::DimensionMismatch(format!(
                "{} location slopes, expected {NUM_SLOPES}",
                location.len()
            )));
        }
        if !(scale_offset.is_finite() && scale_offset >= 0.0) || location.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("design parameters must be finite, offset >= 0".into()));
        }
        let z = quantile_shift(tau);
        let mut true_beta = Vec::with_capacity(NUM_SLOPES + 1);
        true_beta.push(scale_offset * z);
        true_beta.extend_from_slice(&location);
        true_beta[1] += z;
        Ok(Self {
            n,
            tau,
            true_beta,
            location,
            scale_offset,
        })
    }

    /// Coefficient indices (intercept included) with a nonzero true value.
    pub fn active_columns(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain((1..=NUM_SLOPES).filter(|&j| self.true_beta[j] != 0.0))
            .collect()
    }

    /// True zero slopes summarized in the "Zeros" aggregate; the scale
    /// covariate `X1` is reported on its own.
    pub fn zero_columns(&self) -> Vec<usize> {
        (2..=NUM_SLOPES).filter(|&j| self.true_beta[j] == 0.0).collect()
    }

    /// All slopes with a true value of zero, `X1` included.
    pub fn zero_slopes(&self) -> Vec<usize> {
        (1..=NUM_SLOPES).filter(|&j| self.true_beta[j] == 0.0).collect()
    }

    pub fn nonzero_slopes(&self) -> Vec<usize> {
        (1..=NUM_SLOPES).filter(|&j| self.true_beta[j] != 0.0).collect()
    }

    /// Error-density at zero for a row with `X1 = x1`.
    pub fn density_at_zero(&self, x1: f64) -> f64 {
        let z = quantile_shift(self.tau);
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / (self.scale_offset + x1)
    }

    /// One covariate row (without intercept) drawn from the covariate law.
    pub(crate) fn draw_covariates<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let phi = std_normal();
        for (j, v) in out.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = if j == 0 { phi.cdf(z) } else { z };
        }
    }

    /// Draws `(Dataset, true_beta)` from stream `(seed, 0)`.
    pub fn generate(&self, seed: u64) -> Result<(Dataset, Vec<f64>)> {
        let mut s = rng::stream(seed, 0);
        let k = NUM_SLOPES + 1;
        let mut x = vec![0.0; self.n * k];
        let mut y = Vec::with_capacity(self.n);
        for row in x.chunks_mut(k) {
            row[0] = 1.0;
            self.draw_covariates(&mut s, &mut row[1..]);
            let xi: f64 = s.sample(StandardNormal);
            let loc: f64 = row[1..].iter().zip(&self.location).map(|(a, b)| a * b).sum();
            y.push(loc + (self.scale_offset + row[1]) * xi);
        }
        let names = std::iter::once(crate::data::INTERCEPT_NAME.to_string())
            .chain((1..=NUM_SLOPES).map(|j| format!("X{j}")))
            .collect();
        Ok((Dataset::from_design(y, x, k, names)?, self.true_beta.clone()))
    }
}

/// `Phi^-1(tau)`, exactly zero at the median.
fn quantile_shift(tau: QuantileLevel) -> f64 {
    if tau.value() == 0.5 {
        0.0
    } else {
        std_normal().inverse_cdf(tau.value())
    }
}
