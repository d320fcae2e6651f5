//! Primal-dual interior point method for the quantile regression linear program.
//!
//! The unpenalized problem `min_b sum_i rho_tau(y_i - x_i'b)` is solved through
//! its bounded dual
//!
//! ```text
//! max  y'a   s.t.  X'a = (1 - tau) X'1,   0 <= a <= 1
//! ```
//!
//! with a Mehrotra predictor-corrector on the normal equations
//! `X' diag(q) X`, which are only `k x k`. The coefficients are recovered as the
//! (negated) equality multipliers. Penalties are handled upstream by appending
//! pseudo-observations, so this module only ever sees plain rows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const STEP_FRACTION: f64 = 0.99995;

/// Row-major view of an LP instance.
pub(crate) struct Rows<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub k: usize,
}

impl Rows<'_> {
    #[inline]
    pub fn m(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IpmSolution {
    pub beta: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn step_bound(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1e20, f64::min)
}

/// `X' diag(q) X` as a dense `k x k` matrix.
fn weighted_gram(rows: &Rows, q: &[f64]) -> DMatrix<f64> {
    let k = rows.k;
    let mut g = vec![0.0; k * k];
    for i in 0..rows.m() {
        let r = rows.row(i);
        let qi = q[i];
        for a in 0..k {
            let s = qi * r[a];
            if s == 0.0 {
                continue;
            }
            let ga = &mut g[a * k..a * k + k];
            for b in a..k {
                ga[b] += s * r[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[a * k + b] = g[b * k + a];
        }
    }
    DMatrix::from_row_slice(k, k, &g)
}

/// `X' v`.
fn xt_mul(rows: &Rows, v: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(rows.k);
    for i in 0..rows.m() {
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        for (o, xv) in out.iter_mut().zip(rows.row(i)) {
            *o += vi * xv;
        }
    }
    out
}

/// `X d`.
fn x_mul(rows: &Rows, d: &DVector<f64>) -> Vec<f64> {
    (0..rows.m())
        .map(|i| rows.row(i).iter().zip(d.iter()).map(|(a, b)| a * b).sum())
        .collect()
}

/// Runs the interior point iteration until the duality gap falls below
/// `rel_tol * (1 + |objective|)` or `max_iter` is reached.
pub(crate) fn solve(rows: &Rows, tau: f64, rel_tol: f64, max_iter: usize) -> Result<IpmSolution> {
    let m = rows.m();
    let k = rows.k;
    let sum_y: f64 = rows.y.iter().sum();

    // Primal (dual of the regression) variables: x in (0,1), slack s = 1 - x.
    let mut x = vec![1.0 - tau; m];
    let mut s = vec![tau; m];
    let ones = vec![1.0; m];
    let rhs_b = xt_mul(rows, &ones) * (1.0 - tau);

    // c = -y; least-squares start for the multipliers.
    let c: Vec<f64> = rows.y.iter().map(|v| -v).collect();
    let gram = weighted_gram(rows, &ones);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("design matrix is rank deficient".into()))?;
    let mut yd = chol.solve(&xt_mul(rows, &c));
    let ay = x_mul(rows, &yd);
    let mut r: Vec<f64> = c.iter().zip(&ay).map(|(ci, a)| ci - a).collect();
    for ri in r.iter_mut() {
        if *ri == 0.0 {
            *ri = 0.001;
        }
    }
    let mut z: Vec<f64> = r.iter().map(|v| v.max(0.0)).collect();
    let mut w: Vec<f64> = z.iter().zip(&r).map(|(zi, ri)| zi - ri).collect();

    let objective = |x: &[f64]| -> f64 {
        let cx: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        -cx - (1.0 - tau) * sum_y
    };
    let gap_of = |x: &[f64], yd: &DVector<f64>, w: &[f64]| -> f64 {
        let cx: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        let yb = yd.dot(&rhs_b);
        let uw: f64 = w.iter().sum();
        cx - yb + uw
    };

    let mut gap = gap_of(&x, &yd, &w);
    let mut it = 0;
    let mut q = vec![0.0; m];
    let mut qr = vec![0.0; m];
    let mut dx = vec![0.0; m];
    let mut ds = vec![0.0; m];
    let mut dz = vec![0.0; m];
    let mut dw = vec![0.0; m];

    while gap > rel_tol * (1.0 + objective(&x).abs()) && it < max_iter {
        it += 1;
        for i in 0..m {
            q[i] = 1.0 / (z[i] / x[i] + w[i] / s[i]);
            r[i] = z[i] - w[i];
            qr[i] = q[i] * r[i];
        }
        let chol = match weighted_gram(rows, &q).cholesky() {
            Some(ch) => ch,
            None => break,
        };
        let mut rhs = xt_mul(rows, &qr);
        let mut dy = chol.solve(&rhs);
        let ady = x_mul(rows, &dy);
        for i in 0..m {
            dx[i] = q[i] * (ady[i] - r[i]);
            ds[i] = -dx[i];
            dz[i] = -z[i] * (dx[i] / x[i] + 1.0);
            dw[i] = -w[i] * (ds[i] / s[i] + 1.0);
        }
        let mut fp = (STEP_FRACTION * step_bound(&x, &dx).min(step_bound(&s, &ds))).min(1.0);
        let mut fd = (STEP_FRACTION * step_bound(&w, &dw).min(step_bound(&z, &dz))).min(1.0);

        if fp.min(fd) < 1.0 {
            // Corrector step.
            let mu: f64 = (0..m).map(|i| z[i] * x[i] + w[i] * s[i]).sum();
            let g: f64 = (0..m)
                .map(|i| {
                    (z[i] + fd * dz[i]) * (x[i] + fp * dx[i]) + (w[i] + fd * dw[i]) * (s[i] + fp * ds[i])
                })
                .sum();
            let mu = mu * (g / mu).powi(3) / (2.0 * m as f64);
            let mut corr = vec![0.0; m];
            let mut xi = vec![0.0; m];
            let mut dxdz = vec![0.0; m];
            let mut dsdw = vec![0.0; m];
            for i in 0..m {
                dxdz[i] = dx[i] * dz[i];
                dsdw[i] = ds[i] * dw[i];
                xi[i] = mu * (1.0 / x[i] - 1.0 / s[i]);
                corr[i] = q[i] * (dxdz[i] - dsdw[i] - xi[i]);
            }
            rhs += xt_mul(rows, &corr);
            dy = chol.solve(&rhs);
            let ady = x_mul(rows, &dy);
            for i in 0..m {
                dx[i] = q[i] * (ady[i] + xi[i] - r[i] - dxdz[i] + dsdw[i]);
                ds[i] = -dx[i];
                dz[i] = mu / x[i] - z[i] - z[i] * dx[i] / x[i] - dxdz[i];
                dw[i] = mu / s[i] - w[i] - w[i] * ds[i] / s[i] - dsdw[i];
            }
            fp = (STEP_FRACTION * step_bound(&x, &dx).min(step_bound(&s, &ds))).min(1.0);
            fd = (STEP_FRACTION * step_bound(&w, &dw).min(step_bound(&z, &dz))).min(1.0);
        }

        for i in 0..m {
            x[i] += fp * dx[i];
            s[i] += fp * ds[i];
            w[i] += fd * dw[i];
            z[i] += fd * dz[i];
        }
        yd += dy * fd;
        let new_gap = gap_of(&x, &yd, &w);
        if !new_gap.is_finite() {
            break;
        }
        gap = new_gap;
    }

    let converged = gap <= rel_tol * (1.0 + objective(&x).abs());
    debug_assert_eq!(yd.len(), k);
    Ok(IpmSolution {
        beta: yd.iter().map(|v| -v).collect(),
        gap,
        iterations: it,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_five() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x = [1.0; 5];
        let sol = solve(&Rows { x: &x, y: &y, k: 1 }, 0.5, 1e-10, 200).unwrap();
        assert!(sol.converged);
        assert!((sol.beta[0] - 3.0).abs() < 1e-6, "{:?}", sol.beta);
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        let y = [1.0, 2.0, 3.0];
        let x = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert!(matches!(
            solve(&Rows { x: &x, y: &y, k: 2 }, 0.5, 1e-10, 200),
            Err(Error::Singular(_))
        ));
    }
}
