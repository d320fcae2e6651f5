//! Bootstrap weight distributions for the wild residual bootstrap.
//!
//! A valid law `G` has a support gap around zero, satisfies
//! `int_0^inf r^-1 dG = -int_-inf^0 r^-1 dG = 1/2`, and has its `tau`th
//! quantile at zero. Every shipped law is a finite mixture of point masses or
//! of pieces with density proportional to `|r|` on an interval, which keeps
//! the inverse-moment integrals and the inverse CDF in closed form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Anything that can produce i.i.d. bootstrap weights from a stream.
pub trait WeightSampler {
    fn draw(&self, rng: &mut Stream) -> f64;

    fn sample(&self, n: usize, rng: &mut Stream) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    TwoPoint,
    FengContinuous,
    SuppG1,
    SuppG2,
    SuppPointMass,
}

impl LawKind {
    pub const ALL: [LawKind; 5] = [
        LawKind::TwoPoint,
        LawKind::FengContinuous,
        LawKind::SuppG1,
        LawKind::SuppG2,
        LawKind::SuppPointMass,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            LawKind::TwoPoint => "two-point",
            LawKind::FengContinuous => "feng",
            LawKind::SuppG1 => "g1",
            LawKind::SuppG2 => "g2",
            LawKind::SuppPointMass => "point-mass",
        }
    }

    fn param_names(self) -> &'static [&'static str] {
        match self {
            LawKind::TwoPoint | LawKind::FengContinuous => &[],
            LawKind::SuppG1 => &["v1", "v2"],
            LawKind::SuppG2 => &["a", "b", "v1", "v2", "v3", "v4"],
            LawKind::SuppPointMass => &["a", "b"],
        }
    }
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for LawKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LawKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown weight law '{s}'")))
    }
}

/// A piece with density `c |r|` for `|r|` in `[lo, hi]` on one side of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LinearPiece {
    sign: f64,
    lo: f64,
    hi: f64,
    mass: f64,
}

impl LinearPiece {
    fn new(sign: f64, center: f64, half_width: f64, mass: f64) -> Self {
        Self {
            sign,
            lo: center - half_width,
            hi: center + half_width,
            mass,
        }
    }

    /// Density constant `c` in `g(r) = c |r|`.
    fn slope(&self) -> f64 {
        2.0 * self.mass / (self.hi * self.hi - self.lo * self.lo)
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        self.sign * (self.lo * self.lo + u * (self.hi * self.hi - self.lo * self.lo)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Shape {
    /// `(location, probability)` pairs.
    Atoms(Vec<(f64, f64)>),
    Linear(Vec<LinearPiece>),
}

/// A member of the shipped weight-law catalogue, bound to a quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLaw {
    kind: LawKind,
    tau: f64,
    params: BTreeMap<String, f64>,
    shape: Shape,
}

fn open_interval(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {v} must satisfy {lo} < {name} < {hi}"
        )))
    }
}

impl WeightLaw {
    /// Builds a law. Missing parameters of the G1, G2 and point-mass laws default to
    /// interior midpoints (`a = tau/2`, `b = (1-tau)/2`, each `v` half its bound).
    pub fn new(kind: LawKind, tau: f64, params: &BTreeMap<String, f64>) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidQuantile(tau));
        }
        if let Some(bad) = params.keys().find(|k| !kind.param_names().contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "law {kind} does not take parameter '{bad}' (accepted: {:?})",
                kind.param_names()
            )));
        }
        let get = |name: &str, default: f64| params.get(name).copied().unwrap_or(default);
        let mut used = BTreeMap::new();
        let shape = match kind {
            LawKind::TwoPoint => Shape::Atoms(vec![(-2.0 * tau, tau), (2.0 * (1.0 - tau), 1.0 - tau)]),
            LawKind::FengContinuous => {
                if !(tau > 0.125 && tau < 0.875) {
                    return Err(Error::InvalidParameter(format!(
                        "law feng requires 1/8 < tau < 7/8, got tau = {tau}"
                    )));
                }
                Shape::Linear(vec![
                    LinearPiece::new(-1.0, 2.0 * tau, 0.25, tau),
                    LinearPiece::new(1.0, 2.0 * (1.0 - tau), 0.25, 1.0 - tau),
                ])
            }
            LawKind::SuppG1 => {
                let v1 = get("v1", tau / 2.0);
                let v2 = get("v2", (1.0 - tau) / 2.0);
                open_interval("v1", v1, 0.0, tau)?;
                open_interval("v2", v2, 0.0, 1.0 - tau)?;
                used.insert("v1".into(), v1);
                used.insert("v2".into(), v2);
                Shape::Linear(vec![
                    LinearPiece::new(-1.0, 2.0 * tau, 2.0 * v1, tau),
                    LinearPiece::new(1.0, 2.0 * (1.0 - tau), 2.0 * v2, 1.0 - tau),
                ])
            }
            LawKind::SuppG2 => {
                let a = get("a", tau / 2.0);
                let b = get("b", (1.0 - tau) / 2.0);
                open_interval("a", a, 0.0, tau)?;
                open_interval("b", b, 0.0, 1.0 - tau)?;
                let v1 = get("v1", a / 2.0);
                let v2 = get("v2", (tau - a) / 2.0);
                let v3 = get("v3", b / 2.0);
                let v4 = get("v4", (1.0 - tau - b) / 2.0);
                open_interval("v1", v1, 0.0, a)?;
                open_interval("v2", v2, 0.0, tau - a)?;
                open_interval("v3", v3, 0.0, b)?;
                open_interval("v4", v4, 0.0, 1.0 - tau - b)?;
                for (k, v) in [("a", a), ("b", b), ("v1", v1), ("v2", v2), ("v3", v3), ("v4", v4)] {
                    used.insert(k.to_string(), v);
                }
                Shape::Linear(vec![
                    LinearPiece::new(-1.0, 4.0 * a, 4.0 * v1, a),
                    LinearPiece::new(-1.0, 4.0 * (tau - a), 4.0 * v2, tau - a),
                    LinearPiece::new(1.0, 4.0 * b, 4.0 * v3, b),
                    LinearPiece::new(1.0, 4.0 * (1.0 - tau - b), 4.0 * v4, 1.0 - tau - b),
                ])
            }
            LawKind::SuppPointMass => {
                let a = get("a", tau / 2.0);
                let b = get("b", (1.0 - tau) / 2.0);
                open_interval("a", a, 0.0, tau)?;
                open_interval("b", b, 0.0, 1.0 - tau)?;
                used.insert("a".into(), a);
                used.insert("b".into(), b);
                Shape::Atoms(vec![
                    (-4.0 * a, a),
                    (-4.0 * (tau - a), tau - a),
                    (4.0 * b, b),
                    (4.0 * (1.0 - tau - b), 1.0 - tau - b),
                ])
            }
        };
        Ok(Self {
            kind,
            tau,
            params: used,
            shape,
        })
    }

    /// Law with default parameters.
    pub fn with_defaults(kind: LawKind, tau: f64) -> Result<Self> {
        Self::new(kind, tau, &BTreeMap::new())
    }

    pub fn two_point(tau: f64) -> Result<Self> {
        Self::with_defaults(LawKind::TwoPoint, tau)
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Resolved parameters (defaults filled in).
    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Point masses `(location, probability)`, for discrete laws.
    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match &self.shape {
            Shape::Atoms(a) => Some(a),
            Shape::Linear(_) => None,
        }
    }

    /// Density at `r`, for continuous laws.
    pub fn density(&self, r: f64) -> Option<f64> {
        match &self.shape {
            Shape::Atoms(_) => None,
            Shape::Linear(pieces) => Some(
                pieces
                    .iter()
                    .filter(|p| r * p.sign > 0.0 && (p.lo..=p.hi).contains(&r.abs()))
                    .map(|p| p.slope() * r.abs())
                    .sum(),
            ),
        }
    }

    /// Closed-form `(int_0^inf r^-1 dG, int_-inf^0 r^-1 dG)`.
    pub fn inverse_moments(&self) -> (f64, f64) {
        let (mut pos, mut neg) = (0.0, 0.0);
        match &self.shape {
            Shape::Atoms(atoms) => {
                for &(r, p) in atoms {
                    if r > 0.0 {
                        pos += p / r;
                    } else {
                        neg += p / r;
                    }
                }
            }
            Shape::Linear(pieces) => {
                for p in pieces {
                    let v = p.slope() * (p.hi - p.lo);
                    if p.sign > 0.0 {
                        pos += v;
                    } else {
                        neg -= v;
                    }
                }
            }
        }
        (pos, neg)
    }

    /// Closed-form support gap `(c1, c2)` with the support avoiding `(-c1, c2)`.
    pub fn support_gap(&self) -> (f64, f64) {
        let (mut c1, mut c2) = (f64::INFINITY, f64::INFINITY);
        match &self.shape {
            Shape::Atoms(atoms) => {
                for &(r, _) in atoms {
                    if r < 0.0 {
                        c1 = c1.min(-r);
                    } else {
                        c2 = c2.min(r);
                    }
                }
            }
            Shape::Linear(pieces) => {
                for p in pieces {
                    if p.sign < 0.0 {
                        c1 = c1.min(p.lo);
                    } else {
                        c2 = c2.min(p.lo);
                    }
                }
            }
        }
        (c1, c2)
    }

    /// Total probability on the negative half-line.
    pub fn negative_mass(&self) -> f64 {
        match &self.shape {
            Shape::Atoms(atoms) => atoms.iter().filter(|(r, _)| *r < 0.0).map(|(_, p)| p).sum(),
            Shape::Linear(pieces) => pieces.iter().filter(|p| p.sign < 0.0).map(|p| p.mass).sum(),
        }
    }
}

impl WeightSampler for WeightLaw {
    fn draw(&self, rng: &mut Stream) -> f64 {
        let u: f64 = rng.random();
        match &self.shape {
            Shape::Atoms(atoms) => {
                let mut acc = 0.0;
                for &(r, p) in atoms {
                    acc += p;
                    if u < acc {
                        return r;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            Shape::Linear(pieces) => {
                let v: f64 = rng.random();
                let mut acc = 0.0;
                for p in pieces {
                    acc += p.mass;
                    if u < acc {
                        return p.inverse_cdf(v);
                    }
                }
                pieces[pieces.len() - 1].inverse_cdf(v)
            }
        }
    }
}

/// Monte Carlo check of the support-gap, inverse-moment and quantile conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub tau: f64,
    pub samples: usize,
    pub tol: f64,
    /// `-max{r < 0}` over the draws.
    pub gap_negative: f64,
    /// `min{r > 0}` over the draws.
    pub gap_positive: f64,
    pub zero_draws: usize,
    /// Estimate of `int_0^inf r^-1 dG` (target 1/2).
    pub positive_integral: f64,
    /// Estimate of `int_-inf^0 r^-1 dG` (target -1/2).
    pub negative_integral: f64,
    pub mean_abs: f64,
    /// Empirical `G(0-)` and `G(0)`.
    pub cdf_below_zero: f64,
    pub cdf_at_zero: f64,
    /// Order-statistic `tau`-quantile of the draws.
    pub empirical_quantile: f64,
    pub support_gap_ok: bool,
    pub inverse_moments_ok: bool,
    pub quantile_ok: bool,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.support_gap_ok && self.inverse_moments_ok && self.quantile_ok
    }
}

pub const MIN_VERIFY_SAMPLES: usize = 10_000;

/// Draws `mc_samples` weights and tests each condition at tolerance `tol`.
pub fn verify_conditions<S: WeightSampler + ?Sized>(
    law: &S,
    tau: f64,
    mc_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport> {
    if mc_samples < MIN_VERIFY_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_VERIFY_SAMPLES} samples, got {mc_samples}"
        )));
    }
    let mut s = rng::stream(seed, 0);
    let mut draws = law.sample(mc_samples, &mut s);
    let n = mc_samples as f64;
    let (mut max_neg, mut min_pos) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut pos_int, mut neg_int, mut abs_sum) = (0.0, 0.0, 0.0);
    let (mut below, mut zeros) = (0usize, 0usize);
    for &r in &draws {
        abs_sum += r.abs();
        if r < 0.0 {
            below += 1;
            max_neg = max_neg.max(r);
            neg_int += 1.0 / r;
        } else if r > 0.0 {
            min_pos = min_pos.min(r);
            pos_int += 1.0 / r;
        } else {
            zeros += 1;
        }
    }
    draws.sort_by(f64::total_cmp);
    let k = ((tau * n - 1e-9).ceil() as usize).clamp(1, mc_samples);
    let cdf_below_zero = below as f64 / n;
    let cdf_at_zero = (below + zeros) as f64 / n;
    let positive_integral = pos_int / n;
    let negative_integral = neg_int / n;
    Ok(ConditionReport {
        tau,
        samples: mc_samples,
        tol,
        gap_negative: -max_neg,
        gap_positive: min_pos,
        zero_draws: zeros,
        positive_integral,
        negative_integral,
        mean_abs: abs_sum / n,
        cdf_below_zero,
        cdf_at_zero,
        empirical_quantile: draws[k - 1],
        support_gap_ok: zeros == 0 && max_neg < 0.0 && min_pos > 0.0,
        inverse_moments_ok: (positive_integral - 0.5).abs() <= tol && (negative_integral + 0.5).abs() <= tol,
        quantile_ok: cdf_below_zero <= tau + tol && cdf_at_zero >= tau - tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn two_point_locations() {
        let l = WeightLaw::two_point(0.5).unwrap();
        assert_eq!(l.atoms().unwrap(), &[(-1.0, 0.5), (1.0, 0.5)]);
        let l = WeightLaw::two_point(0.7).unwrap();
        let a = l.atoms().unwrap();
        assert!((a[0].0 + 1.4).abs() < 1e-15 && (a[0].1 - 0.7).abs() < 1e-15);
        assert!((a[1].0 - 0.6).abs() < 1e-15 && (a[1].1 - 0.3).abs() < 1e-15);
        let (pos, neg) = l.inverse_moments();
        assert!((pos - 0.5).abs() < 1e-15 && (neg + 0.5).abs() < 1e-15);
    }

    #[test]
    fn parameter_constraints() {
        assert!(WeightLaw::with_defaults(LawKind::FengContinuous, 0.05).is_err());
        assert!(WeightLaw::with_defaults(LawKind::FengContinuous, 0.3).is_ok());
        assert!(WeightLaw::new(LawKind::SuppG1, 0.3, &params(&[("v1", 0.3)])).is_err());
        assert!(WeightLaw::new(LawKind::SuppG1, 0.3, &params(&[("v1", 0.29)])).is_ok());
        assert!(WeightLaw::new(LawKind::SuppPointMass, 0.5, &params(&[("a", 0.5)])).is_err());
        assert!(WeightLaw::new(LawKind::SuppG2, 0.5, &params(&[("a", 0.2), ("v1", 0.25)])).is_err());
        assert!(WeightLaw::new(LawKind::TwoPoint, 0.5, &params(&[("a", 0.2)])).is_err());
        assert!(WeightLaw::with_defaults(LawKind::TwoPoint, 1.0).is_err());
    }

    #[test]
    fn closed_form_conditions_for_every_law() {
        for kind in LawKind::ALL {
            for tau in [0.3, 0.5, 0.7] {
                let l = WeightLaw::with_defaults(kind, tau).unwrap();
                let (pos, neg) = l.inverse_moments();
                assert!((pos - 0.5).abs() < 1e-12, "{kind} {tau}: {pos}");
                assert!((neg + 0.5).abs() < 1e-12, "{kind} {tau}: {neg}");
                assert!((l.negative_mass() - tau).abs() < 1e-12);
                let (c1, c2) = l.support_gap();
                assert!(c1 > 0.0 && c2 > 0.0);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_respects_gap() {
        for kind in LawKind::ALL {
            let l = WeightLaw::with_defaults(kind, 0.5).unwrap();
            let a = l.sample(2000, &mut rng::stream(11, 0));
            let b = l.sample(2000, &mut rng::stream(11, 0));
            assert_eq!(a, b);
            let (c1, c2) = l.support_gap();
            assert!(a.iter().all(|r| *r <= -c1 || *r >= c2), "{kind}");
        }
    }

    #[test]
    fn two_point_sign_frequency() {
        let l = WeightLaw::two_point(0.5).unwrap();
        let draws = l.sample(100_000, &mut rng::stream(2024, 0));
        let neg = draws.iter().filter(|r| **r < 0.0).count() as f64 / 1e5;
        assert!((neg - 0.5).abs() <= 0.01, "{neg}");
    }

    #[test]
    fn point_mass_report_passes() {
        let l = WeightLaw::new(LawKind::SuppPointMass, 0.5, &params(&[("a", 0.25), ("b", 0.25)])).unwrap();
        let rep = verify_conditions(&l, 0.5, 100_000, 0.02, 1).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert!(verify_conditions(&l, 0.5, 100, 0.02, 1).is_err());
    }

    #[test]
    fn law_names_round_trip() {
        for kind in LawKind::ALL {
            assert_eq!(kind.cli_name().parse::<LawKind>().unwrap(), kind);
        }
        assert!("nope".parse::<LawKind>().is_err());
    }
}
