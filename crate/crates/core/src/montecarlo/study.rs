//! Coverage study: repeated draws from a design, per-method tuning, bootstrap
//! intervals and selection counts.

use std::cell::RefCell;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{PaperDesign, NUM_SLOPES};
use crate::bootstrap::{self, BootstrapDraws, ResidualAdjustment};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::penalty::{self, ThresholdSequence, ThresholdSource};
use crate::rng::derive_seed;
use crate::solver::{self, PenaltySpec};
use crate::tuning::{self, LambdaGrid};
use crate::weights::WeightLaw;

pub const MIN_REPS: usize = 50;
/// Largest tolerated fraction of failed replications per method.
pub const MAX_REP_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnRule {
    /// `a_n = n^(-1/3)`.
    N13,
    /// Bootstrap-MSE choice among the default candidates.
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selector {
    /// Adaptive L1 with BIC-tuned lambda.
    AdaptiveBic { gamma: f64 },
    /// L1 with cross-validated lambda.
    LassoCv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    NewAl { gamma: f64 },
    NewL {
        rule: AnRule,
        #[serde(default)]
        source: ThresholdSource,
    },
    FullWb,
    OracleWb,
    TwoStepWb { selector: Selector },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::NewAl { gamma } => write!(f, "New AL (gamma={gamma})"),
            Method::NewL { rule, source } => {
                let a = match rule {
                    AnRule::N13 => "n^-1/3",
                    AnRule::Data => "data",
                };
                match source {
                    ThresholdSource::Ordinary => write!(f, "New L (a_n={a})"),
                    ThresholdSource::Lasso => write!(f, "New L (a_n={a}, lasso threshold)"),
                }
            }
            Method::FullWb => write!(f, "Full WB"),
            Method::OracleWb => write!(f, "Oracle WB"),
            Method::TwoStepWb {
                selector: Selector::AdaptiveBic { gamma },
            } => write!(f, "TS AL WB (gamma={gamma})"),
            Method::TwoStepWb {
                selector: Selector::LassoCv,
            } => write!(f, "TS L WB"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOptions {
    /// `None` uses the default grid for the design's `n` and `p`.
    pub grid: Option<LambdaGrid>,
    pub cv_folds: usize,
    /// Threshold candidates as multiples of `n^(-1/3)`.
    pub a_n_multipliers: Vec<f64>,
    pub b_small: usize,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            grid: None,
            cv_folds: tuning::DEFAULT_FOLDS,
            a_n_multipliers: tuning::DEFAULT_AN_MULTIPLIERS.to_vec(),
            b_small: tuning::DEFAULT_B_SMALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub design: PaperDesign,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub boot: usize,
    pub alpha: f64,
    pub seed: u64,
    pub law: WeightLaw,
    pub tuning: TuningOptions,
    /// Residual treatment of the Full, Oracle and two-step comparators.
    pub comparator_residuals: ResidualAdjustment,
}

impl StudyConfig {
    /// Two-point law, default tuning, `alpha = 0.05`, leverage-corrected
    /// comparator residuals.
    pub fn new(design: PaperDesign, methods: Vec<Method>, reps: usize, boot: usize, seed: u64) -> Result<Self> {
        let law = WeightLaw::two_point(design.tau.value())?;
        Ok(Self {
            design,
            methods,
            reps,
            boot,
            alpha: 0.05,
            seed,
            law,
            tuning: TuningOptions::default(),
            comparator_residuals: ResidualAdjustment::Leverage,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.reps < MIN_REPS {
            return Err(Error::InvalidParameter(format!("need reps >= {MIN_REPS}, got {}", self.reps)));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods requested".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.law.tau() != self.design.tau.value() {
            return Err(Error::InvalidParameter(format!(
                "weight law built for tau {} but design has tau {}",
                self.law.tau(),
                self.design.tau.value()
            )));
        }
        for m in &self.methods {
            match m {
                Method::NewAl { gamma }
                | Method::TwoStepWb {
                    selector: Selector::AdaptiveBic { gamma },
                } if !(gamma.is_finite() && *gamma > 0.0) => {
                    return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientStats {
    pub coefficient: usize,
    pub true_value: f64,
    /// Replications in which an interval was produced.
    pub count: usize,
    pub covered: usize,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub mean_length: Option<f64>,
    pub length_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub label: String,
    pub coefficients: Vec<CoefficientStats>,
    /// Pooled over the coefficients listed in `SimReport::zero_columns`.
    pub zeros: CoefficientStats,
    pub tp: f64,
    pub fp: f64,
    pub completed: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: StudyConfig,
    pub true_beta: Vec<f64>,
    pub zero_columns: Vec<usize>,
    pub methods: Vec<MethodReport>,
}

/// Intervals (by coefficient, `None` when the coefficient is not in the
/// model) and the selected slopes of one method on one replication.
#[derive(Debug, Clone)]
struct Outcome {
    intervals: Vec<Option<(f64, f64)>>,
    selected: Vec<usize>,
}

fn nonzero_slopes(beta: &[f64]) -> Vec<usize> {
    (1..beta.len()).filter(|&j| beta[j] != 0.0).collect()
}

fn intervals_for(draws: &BootstrapDraws, alpha: f64, columns: &[usize]) -> Result<Vec<Option<(f64, f64)>>> {
    let ci = bootstrap::percentile_ci(draws, alpha)?;
    let mut out = vec![None; NUM_SLOPES + 1];
    for (c, &j) in ci.iter().zip(columns) {
        out[j] = Some((c.lower, c.upper));
    }
    Ok(out)
}

/// Per-replication memo of tuned penalty levels shared by the methods.
struct RepContext<'a> {
    cfg: &'a StudyConfig,
    data: Dataset,
    grid: &'a LambdaGrid,
    cv_seed: u64,
    boot_seed: u64,
    a_n_seed: u64,
    cv_lambda: RefCell<Option<f64>>,
    bic_lambda: RefCell<Vec<(f64, f64)>>,
}

impl RepContext<'_> {
    fn cv_lambda(&self) -> Result<f64> {
        if let Some(l) = *self.cv_lambda.borrow() {
            return Ok(l);
        }
        let (l, _) = tuning::cv_select(
            &self.data,
            self.cfg.design.tau,
            self.grid,
            self.cfg.tuning.cv_folds,
            self.cv_seed,
        )?;
        *self.cv_lambda.borrow_mut() = Some(l);
        Ok(l)
    }

    fn bic_lambda(&self, gamma: f64) -> Result<f64> {
        if let Some(&(_, l)) = self.bic_lambda.borrow().iter().find(|(g, _)| *g == gamma) {
            return Ok(l);
        }
        let (l, _) = tuning::bic_select(&self.data, self.cfg.design.tau, gamma, self.grid)?;
        self.bic_lambda.borrow_mut().push((gamma, l));
        Ok(l)
    }

    fn unpenalized_on(&self, columns: &[usize]) -> Result<Outcome> {
        let cfg = self.cfg;
        let sub = self.data.select_columns(columns)?;
        let draws = bootstrap::bootstrap_unpenalized_with(
            &sub,
            cfg.design.tau,
            &cfg.law,
            cfg.boot,
            self.boot_seed,
            cfg.comparator_residuals,
        )?;
        let mut full = vec![0.0; NUM_SLOPES + 1];
        for (v, &j) in draws.estimate.iter().zip(columns) {
            full[j] = *v;
        }
        Ok(Outcome {
            intervals: intervals_for(&draws, cfg.alpha, columns)?,
            selected: nonzero_slopes(&full),
        })
    }

    fn run(&self, method: Method) -> Result<Outcome> {
        let cfg = self.cfg;
        let tau = cfg.design.tau;
        let all: Vec<usize> = (0..=NUM_SLOPES).collect();
        match method {
            Method::NewAl { gamma } => {
                let lambda = self.bic_lambda(gamma)?;
                let draws =
                    bootstrap::bootstrap_adaptive(&self.data, tau, lambda, gamma, &cfg.law, cfg.boot, self.boot_seed)?;
                Ok(Outcome {
                    intervals: intervals_for(&draws, cfg.alpha, &all)?,
                    selected: nonzero_slopes(&draws.estimate),
                })
            }
            Method::NewL { rule, source } => {
                let lambda = self.cv_lambda()?;
                let n = self.data.n();
                let ordinary = solver::fit(&self.data, tau, &PenaltySpec::None)?;
                let lasso = solver::fit(&self.data, tau, &PenaltySpec::Lasso { lambda })?;
                let a_n = match rule {
                    AnRule::N13 => ThresholdSequence::rate_n13(n)?,
                    AnRule::Data => {
                        let base = 1.0 / (n as f64).cbrt();
                        let cands: Vec<f64> = cfg.tuning.a_n_multipliers.iter().map(|m| m * base).collect();
                        let (a, _) = tuning::select_a_n_with(
                            &self.data,
                            tau,
                            lambda,
                            &cands,
                            &cfg.law,
                            cfg.tuning.b_small,
                            self.a_n_seed,
                            source,
                        )?;
                        ThresholdSequence::data_driven(a)?
                    }
                };
                let center = penalty::threshold_center(&ordinary.beta, &lasso.beta, &a_n, source)?;
                let draws = bootstrap::bootstrap_lasso_from(
                    &self.data,
                    tau,
                    lambda,
                    center,
                    lasso.beta,
                    &cfg.law,
                    cfg.boot,
                    self.boot_seed,
                )?;
                Ok(Outcome {
                    intervals: intervals_for(&draws, cfg.alpha, &all)?,
                    selected: nonzero_slopes(&draws.estimate),
                })
            }
            Method::FullWb => self.unpenalized_on(&all),
            Method::OracleWb => self.unpenalized_on(&cfg.design.active_columns()),
            Method::TwoStepWb { selector } => {
                let selected = match selector {
                    Selector::AdaptiveBic { gamma } => {
                        let lambda = self.bic_lambda(gamma)?;
                        let pilot = solver::fit(&self.data, tau, &PenaltySpec::None)?;
                        let w = penalty::adaptive_weights(&pilot.beta, gamma)?;
                        penalty::fit_adaptive(&self.data, tau, lambda, &w)?.active_set
                    }
                    Selector::LassoCv => {
                        let lambda = self.cv_lambda()?;
                        solver::fit(&self.data, tau, &PenaltySpec::Lasso { lambda })?.active_set
                    }
                };
                let columns: Vec<usize> = std::iter::once(0).chain(selected.iter().copied()).collect();
                let mut out = self.unpenalized_on(&columns)?;
                out.selected = selected;
                Ok(out)
            }
        }
    }
}

fn stats(coefficient: usize, true_value: f64, cells: &[(f64, f64)], truths: &[f64]) -> CoefficientStats {
    let count = cells.len();
    let covered = cells
        .iter()
        .zip(truths)
        .filter(|((lo, hi), t)| *lo <= **t && **t <= *hi)
        .count();
    let (coverage, coverage_se, mean_length, length_se) = if count == 0 {
        (None, None, None, None)
    } else {
        let c = count as f64;
        let p = covered as f64 / c;
        let lens: Vec<f64> = cells.iter().map(|(lo, hi)| hi - lo).collect();
        let mean = lens.iter().sum::<f64>() / c;
        let var = if count > 1 {
            lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (c - 1.0)
        } else {
            0.0
        };
        (Some(p), Some((p * (1.0 - p) / c).sqrt()), Some(mean), Some((var / c).sqrt()))
    };
    CoefficientStats {
        coefficient,
        true_value,
        count,
        covered,
        coverage,
        coverage_se,
        mean_length,
        length_se,
    }
}

fn aggregate(method: Method, design: &PaperDesign, outcomes: &[Option<Outcome>]) -> MethodReport {
    let beta = &design.true_beta;
    let ok: Vec<&Outcome> = outcomes.iter().flatten().collect();
    let coefficients = (0..=NUM_SLOPES)
        .map(|j| {
            let cells: Vec<(f64, f64)> = ok.iter().filter_map(|o| o.intervals[j]).collect();
            stats(j, beta[j], &cells, &vec![beta[j]; cells.len()])
        })
        .collect();
    let zero_cols = design.zero_columns();
    let zero_cells: Vec<(f64, f64)> = ok
        .iter()
        .flat_map(|o| zero_cols.iter().filter_map(|&j| o.intervals[j]))
        .collect();
    let zeros = stats(0, 0.0, &zero_cells, &vec![0.0; zero_cells.len()]);
    let nonzero = design.nonzero_slopes();
    let done = ok.len().max(1) as f64;
    let tp = ok
        .iter()
        .map(|o| o.selected.iter().filter(|j| nonzero.contains(j)).count())
        .sum::<usize>() as f64
        / done;
    let fp = ok
        .iter()
        .map(|o| o.selected.iter().filter(|j| !nonzero.contains(j)).count())
        .sum::<usize>() as f64
        / done;
    MethodReport {
        method,
        label: method.to_string(),
        coefficients,
        zeros,
        tp,
        fp,
        completed: ok.len(),
        failures: outcomes.len() - ok.len(),
    }
}

/// Runs every method on every replication. Replication `r` draws its data
/// and all of its random streams from `derive_seed(seed, r)`, and methods on
/// the same replication share the tuning folds and bootstrap weights.
pub fn run_study(config: &StudyConfig) -> Result<SimReport> {
    config.validate()?;
    let design = &config.design;
    let grid = match &config.tuning.grid {
        Some(g) => g.clone(),
        None => LambdaGrid::default_for(design.n, NUM_SLOPES)?,
    };
    let per_rep: Vec<Vec<std::result::Result<Outcome, String>>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(config.seed, rep as u64);
            let data = match design.generate(rep_seed) {
                Ok((d, _)) => d,
                Err(e) => return vec![Err(e.to_string()); config.methods.len()],
            };
            let ctx = RepContext {
                cfg: config,
                data,
                grid: &grid,
                cv_seed: derive_seed(rep_seed, 1),
                boot_seed: derive_seed(rep_seed, 2),
                a_n_seed: derive_seed(rep_seed, 3),
                cv_lambda: RefCell::new(None),
                bic_lambda: RefCell::new(Vec::new()),
            };
            config
                .methods
                .iter()
                .map(|&m| ctx.run(m).map_err(|e| format!("replication {rep}: {e}")))
                .collect()
        })
        .collect();

    let mut methods = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let outcomes: Vec<Option<Outcome>> = per_rep.iter().map(|r| r[mi].as_ref().ok().cloned()).collect();
        let failed: Vec<&String> = per_rep.iter().filter_map(|r| r[mi].as_ref().err()).collect();
        if failed.len() as f64 > MAX_REP_FAILURE_RATE * config.reps as f64 {
            return Err(Error::Aborted(format!(
                "{method} failed on {} of {} replications; first failure: {}",
                failed.len(),
                config.reps,
                failed[0]
            )));
        }
        methods.push(aggregate(method, design, &outcomes));
    }
    Ok(SimReport {
        config: config.clone(),
        true_beta: design.true_beta.clone(),
        zero_columns: design.zero_columns(),
        methods,
    })
}
