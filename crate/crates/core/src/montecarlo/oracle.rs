//! Monte Carlo estimate of the oracle sandwich covariance
//! `tau (1 - tau) D1^-1 D0 D1^-1` over the covariate law of a design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::design::{PaperDesign, NUM_SLOPES};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_MC: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCovariance {
    /// Coefficient indices of the rows/columns, intercept first.
    pub columns: Vec<usize>,
    pub d0: Vec<Vec<f64>>,
    pub d1: Vec<Vec<f64>>,
    pub sandwich: Vec<Vec<f64>>,
}

impl OracleCovariance {
    /// Asymptotic standard deviation of `sqrt(n) (beta_hat_j - beta_j)`.
    pub fn asymptotic_sd(&self, coefficient: usize) -> Option<f64> {
        let pos = self.columns.iter().position(|&c| c == coefficient)?;
        Some(self.sandwich[pos][pos].sqrt())
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Sandwich for the true active set of `design`.
pub fn oracle_cov(design: &PaperDesign, n_mc: usize, seed: u64) -> Result<OracleCovariance> {
    oracle_cov_for(design, &design.active_columns(), n_mc, seed)
}

/// Sandwich for an arbitrary column set that includes the intercept.
pub fn oracle_cov_for(
    design: &PaperDesign,
    columns: &[usize],
    n_mc: usize,
    seed: u64,
) -> Result<OracleCovariance> {
    if n_mc < MIN_MC {
        return Err(Error::InvalidParameter(format!("need n_mc >= {MIN_MC}, got {n_mc}")));
    }
    if columns.first() != Some(&0) || columns.iter().any(|&c| c > NUM_SLOPES) {
        return Err(Error::InvalidParameter(format!(
            "columns must start with the intercept and lie in 0..={NUM_SLOPES}: {columns:?}"
        )));
    }
    let q = columns.len();
    let mut d0 = DMatrix::<f64>::zeros(q, q);
    let mut d1 = DMatrix::<f64>::zeros(q, q);
    let mut s = rng::stream(seed, 0);
    let mut row = [0.0; NUM_SLOPES];
    let mut xa = vec![0.0; q];
    for _ in 0..n_mc {
        design.draw_covariates(&mut s, &mut row);
        for (v, &c) in xa.iter_mut().zip(columns) {
            *v = if c == 0 { 1.0 } else { row[c - 1] };
        }
        let f = design.density_at_zero(row[0]);
        for a in 0..q {
            for b in 0..=a {
                let xx = xa[a] * xa[b];
                d0[(a, b)] += xx;
                d1[(a, b)] += f * xx;
            }
        }
    }
    for a in 0..q {
        for b in 0..=a {
            d0[(a, b)] /= n_mc as f64;
            d1[(a, b)] /= n_mc as f64;
            d0[(b, a)] = d0[(a, b)];
            d1[(b, a)] = d1[(a, b)];
        }
    }
    let d1_inv = d1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("D1 is not positive definite".into()))?
        .inverse();
    let tau = design.tau.value();
    let mut sandwich = &d1_inv * &d0 * &d1_inv * (tau * (1.0 - tau));
    sandwich = (&sandwich + sandwich.transpose()) * 0.5;
    Ok(OracleCovariance {
        columns: columns.to_vec(),
        d0: to_rows(&d0),
        d1: to_rows(&d1),
        sandwich: to_rows(&sandwich),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::QuantileLevel;

    #[test]
    fn intercept_only_offset_design_matches_closed_form() {
        // f(0) = phi(0) / (1 + U): D1 = phi(0) ln 2, sandwich = 0.25 / D1^2.
        let d = PaperDesign::custom(200, QuantileLevel::new(0.5).unwrap(), vec![0.0; 10], 1.0).unwrap();
        let o = oracle_cov_for(&d, &[0], 200_000, 1).unwrap();
        let d1 = 0.398_942_280_401_432_7 * std::f64::consts::LN_2;
        assert!((o.d1[0][0] - d1).abs() / d1 < 0.01);
        assert!((o.sandwich[0][0] - 0.25 / (d1 * d1)).abs() / (0.25 / (d1 * d1)) < 0.02);
    }

    #[test]
    fn sandwich_is_symmetric_with_positive_diagonal() {
        let d = PaperDesign::new(100, QuantileLevel::new(0.7).unwrap()).unwrap();
        let o = oracle_cov(&d, 20_000, 2).unwrap();
        assert_eq!(o.columns, vec![0, 1, 3, 5, 7, 9]);
        for i in 0..6 {
            assert!(o.sandwich[i][i] > 0.0 && o.d0[i][i] > 0.0);
            for j in 0..6 {
                assert_eq!(o.sandwich[i][j], o.sandwich[j][i]);
                assert_eq!(o.d1[i][j], o.d1[j][i]);
            }
        }
        assert!(oracle_cov(&d, 100, 2).is_err());
        assert!(oracle_cov_for(&d, &[1, 2], 20_000, 2).is_err());
    }

    #[test]
    fn median_density_example() {
        let d = PaperDesign::new(100, QuantileLevel::new(0.5).unwrap()).unwrap();
        assert!((d.density_at_zero(0.5) - 0.398_942_280_4 / 0.5).abs() < 1e-9);
    }
}
