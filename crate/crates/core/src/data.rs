//! Quantile levels and regression datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A quantile level strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidQuantile(tau))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(q: QuantileLevel) -> f64 {
        q.0
    }
}

/// Response vector plus a row-major design matrix whose column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    n: usize,
    k: usize,
    names: Vec<String>,
}

pub const INTERCEPT_NAME: &str = "Intercept";

impl Dataset {
    /// Builds a dataset from a response and covariate columns. The intercept
    /// column is prepended; `names` labels the covariates only.
    pub fn from_columns(y: Vec<f64>, covariates: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if covariates.len() != names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate columns but {} names",
                covariates.len(),
                names.len()
            )));
        }
        for (j, c) in covariates.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "covariate {} has {} rows, response has {n}",
                    names[j],
                    c.len()
                )));
            }
        }
        let k = covariates.len() + 1;
        let mut x = Vec::with_capacity(n * k);
        for i in 0..n {
            x.push(1.0);
            for c in covariates {
                x.push(c[i]);
            }
        }
        let mut all_names = Vec::with_capacity(k);
        all_names.push(INTERCEPT_NAME.to_string());
        all_names.extend(names);
        Self::from_design(y, x, k, all_names)
    }

    /// Builds a dataset from a full row-major design (intercept column included).
    pub fn from_design(y: Vec<f64>, x: Vec<f64>, k: usize, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if k == 0 || x.len() != n * k {
            return Err(Error::DimensionMismatch(format!(
                "design has {} entries, expected {n}x{k}",
                x.len()
            )));
        }
        if names.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {k} design columns",
                names.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response row {i}")));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "design row {} column {}",
                pos / k,
                pos % k
            )));
        }
        if (0..n).any(|i| x[i * k] != 1.0) {
            return Err(Error::InvalidParameter(
                "design column 0 must be identically 1".into(),
            ));
        }
        Ok(Self { y, x, n, k, names })
    }

    /// Intercept-only dataset.
    pub fn intercept_only(y: Vec<f64>) -> Result<Self> {
        Self::from_columns(y, &[], Vec::new())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of slopes (design columns minus the intercept).
    #[inline]
    pub fn p(&self) -> usize {
        self.k - 1
    }

    /// Number of design columns, intercept included.
    #[inline]
    pub fn ncols(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    /// Row-major design matrix.
    #[inline]
    pub fn design(&self) -> &[f64] {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn max_abs_x(&self) -> f64 {
        self.x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `x_i . beta` for every row.
    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(beta.len(), self.k);
        (0..self.n)
            .map(|i| dot(self.row(i), beta))
            .collect()
    }

    /// `y - X beta`.
    pub fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.y[i] - dot(self.row(i), beta))
            .collect()
    }

    /// Same design with a new response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "response has {} rows, design has {}",
                y.len(),
                self.n
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response row {i}")));
        }
        Ok(Self {
            y,
            x: self.x.clone(),
            n: self.n,
            k: self.k,
            names: self.names.clone(),
        })
    }

    /// Keeps the listed design columns. Column 0 must be first.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.first() != Some(&0) || cols.iter().any(|&c| c >= self.k) {
            return Err(Error::InvalidParameter(
                "column selection must start with the intercept and stay in range".into(),
            ));
        }
        let k = cols.len();
        let mut x = Vec::with_capacity(self.n * k);
        for i in 0..self.n {
            let row = self.row(i);
            x.extend(cols.iter().map(|&c| row[c]));
        }
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Ok(Self {
            y: self.y.clone(),
            x,
            n: self.n,
            k,
            names,
        })
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut x = Vec::with_capacity(rows.len() * self.k);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            y.push(self.y[i]);
            x.extend_from_slice(self.row(i));
        }
        Self {
            y,
            x,
            n: rows.len(),
            k: self.k,
            names: self.names.clone(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_level_bounds() {
        assert!(QuantileLevel::new(0.5).is_ok());
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(QuantileLevel::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn intercept_column_is_enforced() {
        let err = Dataset::from_design(vec![1.0, 2.0], vec![1.0, 3.0, 2.0, 4.0], 2, vec!["a".into(), "b".into()]);
        assert!(err.is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let d = Dataset::from_columns(vec![1.0, f64::NAN], &[vec![0.0, 1.0]], vec!["x".into()]);
        assert!(matches!(d, Err(Error::NonFinite(_))));
    }

    #[test]
    fn column_selection_keeps_intercept() {
        let d = Dataset::from_columns(
            vec![1.0, 2.0, 3.0],
            &[vec![0.1, 0.2, 0.3], vec![5.0, 6.0, 7.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let s = d.select_columns(&[0, 2]).unwrap();
        assert_eq!(s.row(1), &[1.0, 6.0]);
        assert_eq!(s.names(), &["Intercept".to_string(), "b".to_string()]);
        assert!(d.select_columns(&[1]).is_err());
    }
}
