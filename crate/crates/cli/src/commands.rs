use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;
use wildqr::bootstrap::{self, BootstrapDraws};
use wildqr::montecarlo::design::HEADLINE;
use wildqr::montecarlo::{AnRule, Method, PaperDesign, Selector, SimReport, StudyConfig};
use wildqr::penalty::{self, ThresholdSequence, ThresholdSource};
use wildqr::rng::derive_seed;
use wildqr::tuning::{self, LambdaGrid};
use wildqr::{Dataset, LawKind, PenaltySpec, QuantileLevel, WeightLaw};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::input::read_dataset;
use crate::output::{csv_document, emit, json_document, num, Metadata};

fn law_kind(l: LawArg) -> LawKind {
    match l {
        LawArg::TwoPoint => LawKind::TwoPoint,
        LawArg::Feng => LawKind::FengContinuous,
        LawArg::G1 => LawKind::SuppG1,
        LawArg::G2 => LawKind::SuppG2,
        LawArg::PointMass => LawKind::SuppPointMass,
    }
}

fn source(s: SourceArg) -> ThresholdSource {
    match s {
        SourceArg::Ordinary => ThresholdSource::Ordinary,
        SourceArg::Lasso => ThresholdSource::Lasso,
    }
}

pub fn build_law(args: &LawArgs, tau: f64) -> CliResult<WeightLaw> {
    let mut params = BTreeMap::new();
    for kv in &args.law_params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("law parameter '{kv}' is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("law parameter '{kv}' has a non-numeric value")))?;
        if params.insert(k.trim().to_string(), v).is_some() {
            return Err(CliError::Usage(format!("law parameter '{}' given twice", k.trim())));
        }
    }
    Ok(WeightLaw::new(law_kind(args.law), tau, &params)?)
}

fn quantile(tau: f64) -> CliResult<QuantileLevel> {
    QuantileLevel::new(tau).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
struct Tuned {
    lambda: Option<f64>,
    /// "fixed", "bic", "cv" or "none".
    lambda_rule: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<serde_json::Value>,
}

fn resolve_lambda(m: &ModelArgs, data: &Dataset, tau: QuantileLevel, cv_seed: u64) -> CliResult<Tuned> {
    if m.penalty == PenaltyKind::None {
        if m.lambda.is_some() || m.tune.is_some() {
            return Err(CliError::Usage("--lambda and --tune do not apply to --penalty none".into()));
        }
        return Ok(Tuned {
            lambda: None,
            lambda_rule: "none",
            table: None,
        });
    }
    if let Some(l) = m.lambda {
        if !(l.is_finite() && l >= 0.0) {
            return Err(CliError::Usage(format!("--lambda must be nonnegative, got {l}")));
        }
        return Ok(Tuned {
            lambda: Some(l),
            lambda_rule: "fixed",
            table: None,
        });
    }
    let grid = LambdaGrid::default_for(data.n(), data.p())?;
    let rule = m.tune.unwrap_or(match m.penalty {
        PenaltyKind::Lasso => TuneRule::Cv,
        _ => TuneRule::Bic,
    });
    match (m.penalty, rule) {
        (PenaltyKind::Alasso, TuneRule::Bic) => {
            let (l, rows) = tuning::bic_select(data, tau, m.gamma, &grid)?;
            Ok(Tuned {
                lambda: Some(l),
                lambda_rule: "bic",
                table: Some(serde_json::to_value(rows)?),
            })
        }
        (PenaltyKind::Lasso, TuneRule::Cv) => {
            let (l, rows) = tuning::cv_select(data, tau, &grid, m.cv_folds, cv_seed)?;
            Ok(Tuned {
                lambda: Some(l),
                lambda_rule: "cv",
                table: Some(serde_json::to_value(rows)?),
            })
        }
        (PenaltyKind::Alasso, TuneRule::Cv) => Err(CliError::Usage(
            "--tune cv selects the lasso penalty; use --tune bic with alasso".into(),
        )),
        _ => Err(CliError::Usage(
            "--tune bic selects the adaptive penalty; use --tune cv with lasso".into(),
        )),
    }
}

fn check_gamma(m: &ModelArgs) -> CliResult<()> {
    if !(m.gamma.is_finite() && m.gamma > 0.0) {
        return Err(CliError::Usage(format!("--gamma must be positive, got {}", m.gamma)));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Coefficient<'a> {
    name: &'a str,
    estimate: f64,
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let m = &args.model;
    check_gamma(m)?;
    let tau = quantile(m.tau)?;
    let data = read_dataset(&m.input)?;
    let cv_seed = m.cv_seed.unwrap_or(0);
    let tuned = resolve_lambda(m, &data, tau, cv_seed)?;
    let fit = match (m.penalty, tuned.lambda) {
        (PenaltyKind::Alasso, Some(lambda)) => {
            let pilot = wildqr::fit(&data, tau, &PenaltySpec::None)?;
            let w = penalty::adaptive_weights(&pilot.beta, m.gamma)?;
            penalty::fit_adaptive(&data, tau, lambda, &w)?
        }
        (PenaltyKind::Lasso, Some(lambda)) => wildqr::fit(&data, tau, &PenaltySpec::Lasso { lambda })?,
        _ => wildqr::fit(&data, tau, &PenaltySpec::None)?,
    };
    let names = data.names();
    let coefficients: Vec<Coefficient> = names
        .iter()
        .zip(&fit.beta)
        .map(|(n, &b)| Coefficient { name: n, estimate: b })
        .collect();
    let active: Vec<&str> = fit.active_set.iter().map(|&j| names[j].as_str()).collect();
    let meta = Metadata::new("fit", None, args);
    let text = match args.out.format {
        Format::Json => json_document(
            &meta,
            &json!({
                "tau": tau.value(),
                "penalty": m.penalty,
                "gamma": (m.penalty == PenaltyKind::Alasso).then_some(m.gamma),
                "lambda": tuned.lambda,
                "lambda_rule": tuned.lambda_rule,
                "coefficients": coefficients,
                "active_set": active,
                "objective": fit.objective,
                "kkt_gap": fit.kkt_gap,
                "iterations": fit.iterations,
                "tuning": tuned.table,
            }),
        )?,
        Format::Csv => csv_document(
            &meta,
            &[
                ("lambda", json!(tuned.lambda)),
                ("lambda_rule", json!(tuned.lambda_rule)),
                ("objective", json!(fit.objective)),
                ("kkt_gap", json!(fit.kkt_gap)),
            ],
            &["coefficient", "estimate", "active"],
            &coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    vec![
                        c.name.to_string(),
                        num(c.estimate),
                        (j == 0 || fit.active_set.contains(&j)).to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    emit(&text, args.out.output.as_deref())
}

#[derive(Debug, Serialize)]
struct Interval<'a> {
    name: &'a str,
    estimate: f64,
    lower: f64,
    upper: f64,
    level: f64,
}

pub fn cmd_ci(args: &CiArgs) -> CliResult<()> {
    let m = &args.model;
    check_gamma(m)?;
    if args.boot < bootstrap::MIN_REPLICATES {
        return Err(CliError::Usage(format!(
            "--boot must be at least {}, got {}",
            bootstrap::MIN_REPLICATES,
            args.boot
        )));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    if m.penalty != PenaltyKind::Lasso && (args.a_n.is_some() || args.a_n_rule.is_some()) {
        return Err(CliError::Usage("--a-n and --a-n-rule apply to --penalty lasso only".into()));
    }
    let tau = quantile(m.tau)?;
    let law = build_law(&args.law, tau.value())?;
    let data = read_dataset(&m.input)?;
    let cv_seed = m.cv_seed.unwrap_or_else(|| derive_seed(args.seed, 1));
    let boot_seed = derive_seed(args.seed, 2);
    let tuned = resolve_lambda(m, &data, tau, cv_seed)?;
    let mut a_n_used: Option<ThresholdSequence> = None;
    let draws: BootstrapDraws = match (m.penalty, tuned.lambda) {
        (PenaltyKind::Alasso, Some(lambda)) => {
            bootstrap::bootstrap_adaptive(&data, tau, lambda, m.gamma, &law, args.boot, boot_seed)?
        }
        (PenaltyKind::Lasso, Some(lambda)) => {
            let src = source(args.threshold_source);
            let a_n = match (args.a_n, args.a_n_rule.unwrap_or(AnRuleArg::N13)) {
                (Some(a), _) => ThresholdSequence::fixed(a)?,
                (None, AnRuleArg::N13) => ThresholdSequence::rate_n13(data.n())?,
                (None, AnRuleArg::Data) => {
                    let (a, _) = tuning::select_a_n_with(
                        &data,
                        tau,
                        lambda,
                        &tuning::default_a_n_candidates(data.n()),
                        &law,
                        tuning::DEFAULT_B_SMALL,
                        derive_seed(args.seed, 3),
                        src,
                    )?;
                    ThresholdSequence::data_driven(a)?
                }
            };
            a_n_used = Some(a_n);
            bootstrap::bootstrap_lasso(&data, tau, lambda, &a_n, src, &law, args.boot, boot_seed)?
        }
        _ => bootstrap::bootstrap_unpenalized(&data, tau, &law, args.boot, boot_seed)?,
    };
    let ci = bootstrap::percentile_ci(&draws, args.alpha)?;
    let names = data.names();
    let intervals: Vec<Interval> = ci
        .iter()
        .map(|c| Interval {
            name: &names[c.coefficient],
            estimate: draws.estimate[c.coefficient],
            lower: c.lower,
            upper: c.upper,
            level: c.level,
        })
        .collect();
    let summary = json!({
        "tau": tau.value(),
        "method": m.penalty,
        "lambda": tuned.lambda,
        "lambda_rule": tuned.lambda_rule,
        "gamma": (m.penalty == PenaltyKind::Alasso).then_some(m.gamma),
        "a_n": a_n_used.map(|a| a.a_n),
        "a_n_rule": a_n_used.map(|a| a.rule),
        "threshold_source": (m.penalty == PenaltyKind::Lasso).then_some(args.threshold_source),
        "law": { "kind": law.kind().cli_name(), "params": law.params() },
        "boot": args.boot,
        "failures": draws.failures,
        "alpha": args.alpha,
    });
    let meta = Metadata::new("ci", Some(args.seed), args);
    let text = match args.out.format {
        Format::Json => {
            let mut result = summary;
            result["intervals"] = serde_json::to_value(&intervals)?;
            json_document(&meta, &result)?
        }
        Format::Csv => {
            let extra: Vec<(&str, serde_json::Value)> = summary
                .as_object()
                .map(|o| o.iter().map(|(k, v)| (k.as_str(), v.clone())).collect())
                .unwrap_or_default();
            csv_document(
                &meta,
                &extra,
                &["coefficient", "estimate", "lower", "upper", "level"],
                &intervals
                    .iter()
                    .map(|i| vec![i.name.to_string(), num(i.estimate), num(i.lower), num(i.upper), num(i.level)])
                    .collect::<Vec<_>>(),
            )?
        }
    };
    emit(&text, args.out.output.as_deref())
}

pub fn cmd_verify_weights(args: &VerifyArgs) -> CliResult<()> {
    let tau = quantile(args.tau)?;
    let law = build_law(&args.law, tau.value())?;
    let report = wildqr::verify_conditions(&law, tau.value(), args.samples, args.tol, args.seed)?;
    let meta = Metadata::new("verify-weights", Some(args.seed), args);
    let text = match args.out.format {
        Format::Json => json_document(
            &meta,
            &json!({
                "law": { "kind": law.kind().cli_name(), "params": law.params() },
                "all_pass": report.all_pass(),
                "report": report,
            }),
        )?,
        Format::Csv => csv_document(
            &meta,
            &[
                ("law", json!(law.kind().cli_name())),
                ("params", json!(law.params())),
                ("all_pass", json!(report.all_pass())),
            ],
            &["condition", "pass", "statistic", "value"],
            &[
                vec!["support_gap".into(), report.support_gap_ok.to_string(), "gap_negative".into(), num(report.gap_negative)],
                vec!["support_gap".into(), report.support_gap_ok.to_string(), "gap_positive".into(), num(report.gap_positive)],
                vec!["inverse_moments".into(), report.inverse_moments_ok.to_string(), "positive_integral".into(), num(report.positive_integral)],
                vec!["inverse_moments".into(), report.inverse_moments_ok.to_string(), "negative_integral".into(), num(report.negative_integral)],
                vec!["quantile".into(), report.quantile_ok.to_string(), "cdf_below_zero".into(), num(report.cdf_below_zero)],
                vec!["quantile".into(), report.quantile_ok.to_string(), "cdf_at_zero".into(), num(report.cdf_at_zero)],
            ],
        )?,
    };
    emit(&text, args.out.output.as_deref())
}

fn study_method(m: MethodArg, args: &SimulateArgs) -> Method {
    match m {
        MethodArg::NewAl => Method::NewAl { gamma: args.gamma },
        MethodArg::NewL => Method::NewL {
            rule: match args.a_n_rule {
                AnRuleArg::N13 => AnRule::N13,
                AnRuleArg::Data => AnRule::Data,
            },
            source: source(args.threshold_source),
        },
        MethodArg::Full => Method::FullWb,
        MethodArg::Oracle => Method::OracleWb,
        MethodArg::TsAl => Method::TwoStepWb {
            selector: Selector::AdaptiveBic { gamma: args.gamma },
        },
        MethodArg::TsL => Method::TwoStepWb {
            selector: Selector::LassoCv,
        },
    }
}

fn coefficient_name(j: usize) -> String {
    if j == 0 {
        wildqr::data::INTERCEPT_NAME.to_string()
    } else {
        format!("X{j}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn report_rows(report: &SimReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for m in &report.methods {
        let named = m.coefficients.iter().map(|c| (coefficient_name(c.coefficient), c));
        for (name, c) in named.chain(std::iter::once(("Zeros".to_string(), &m.zeros))) {
            rows.push(vec![
                m.label.clone(),
                name,
                num(c.true_value),
                c.count.to_string(),
                c.covered.to_string(),
                opt(c.coverage),
                opt(c.coverage_se),
                opt(c.mean_length),
                opt(c.length_se),
                num(m.tp),
                num(m.fp),
                m.completed.to_string(),
                m.failures.to_string(),
            ]);
        }
    }
    rows
}

pub const REPORT_HEADER: [&str; 13] = [
    "method",
    "coefficient",
    "true_value",
    "count",
    "covered",
    "coverage",
    "coverage_se",
    "mean_length",
    "length_se",
    "tp",
    "fp",
    "completed",
    "failures",
];

/// Coverage x100 with average length in parentheses, in the layout of the
/// reference table.
pub fn summary_table(report: &SimReport) -> String {
    let cfg = &report.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "n={} tau={} reps={} boot={} alpha={} seed={} law={}",
        cfg.design.n,
        cfg.design.tau.value(),
        cfg.reps,
        cfg.boot,
        cfg.alpha,
        cfg.seed,
        cfg.law.kind().cli_name()
    );
    let width = report.methods.iter().map(|m| m.label.len()).max().unwrap_or(6).max(6);
    let _ = write!(out, "{:<width$}", "method");
    for j in HEADLINE {
        let _ = write!(out, " {:>14}", format!("X{j}={}", report.true_beta[j]).chars().take(14).collect::<String>());
    }
    let _ = writeln!(out, " {:>14} {:>5} {:>5}", "Zeros", "TP", "FP");
    let cell = |c: &wildqr::montecarlo::study::CoefficientStats| match (c.coverage, c.mean_length) {
        (Some(p), Some(l)) => format!("{:.1} ({:.2})", 100.0 * p, l),
        _ => "-".to_string(),
    };
    for m in &report.methods {
        let _ = write!(out, "{:<width$}", m.label);
        for j in HEADLINE {
            let _ = write!(out, " {:>14}", cell(&m.coefficients[j]));
        }
        let _ = writeln!(out, " {:>14} {:>5.2} {:>5.2}", cell(&m.zeros), m.tp, m.fp);
    }
    out
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    if !(args.gamma.is_finite() && args.gamma > 0.0) {
        return Err(CliError::Usage(format!("--gamma must be positive, got {}", args.gamma)));
    }
    let tau = quantile(args.tau)?;
    let design = PaperDesign::new(args.n, tau)?;
    let mut methods: Vec<Method> = Vec::new();
    for &m in &args.methods {
        let method = study_method(m, args);
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    let mut cfg = StudyConfig::new(design, methods, args.reps, args.boot, args.seed)?;
    cfg.alpha = args.alpha;
    cfg.law = build_law(&args.law, tau.value())?;
    cfg.tuning.cv_folds = args.cv_folds;
    if args.boot < bootstrap::MIN_REPLICATES {
        return Err(CliError::Usage(format!(
            "--boot must be at least {}, got {}",
            bootstrap::MIN_REPLICATES,
            args.boot
        )));
    }
    let report = wildqr::run_study(&cfg)?;
    std::fs::create_dir_all(&args.output)?;
    let meta = Metadata::new("simulate", Some(args.seed), args);
    std::fs::write(args.output.join("report.json"), json_document(&meta, &report)?)?;
    std::fs::write(
        args.output.join("report.csv"),
        csv_document(&meta, &[], &REPORT_HEADER, &report_rows(&report))?,
    )?;
    let table = summary_table(&report);
    std::fs::write(args.output.join("summary.txt"), &table)?;
    emit(&table, None)
}
