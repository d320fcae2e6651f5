use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "wildqr", version, about = "Penalized quantile regression with wild bootstrap intervals")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "WILDQR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an (optionally penalized) quantile regression.
    Fit(FitArgs),
    /// Bootstrap confidence intervals for every coefficient.
    Ci(CiArgs),
    /// Run the coverage study on the simulation design.
    Simulate(SimulateArgs),
    /// Check the support-gap, inverse-moment and quantile conditions of a weight law.
    VerifyWeights(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    None,
    Lasso,
    Alasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneRule {
    Bic,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnRuleArg {
    N13,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceArg {
    Ordinary,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawArg {
    TwoPoint,
    Feng,
    G1,
    G2,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    NewAl,
    NewL,
    Full,
    Oracle,
    TsAl,
    TsL,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// CSV with a header row; first column is the response.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_enum, alias = "method", default_value = "alasso")]
    pub penalty: PenaltyKind,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, conflicts_with = "tune")]
    pub lambda: Option<f64>,
    /// Defaults to bic for alasso and cv for lasso.
    #[arg(long, value_enum)]
    pub tune: Option<TuneRule>,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    /// Seed for the cross-validation folds (ci uses --seed).
    #[arg(long)]
    pub cv_seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LawArgs {
    #[arg(long, value_enum, default_value = "two-point")]
    pub law: LawArg,
    /// Law parameters as key=value, comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub law_params: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, conflicts_with = "a_n_rule")]
    pub a_n: Option<f64>,
    #[arg(long, value_enum)]
    pub a_n_rule: Option<AnRuleArg>,
    #[arg(long, value_enum, default_value = "ordinary")]
    pub threshold_source: SourceArg,
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, default_value_t = 400)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_value = "new-al,new-l")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value = "n13")]
    pub a_n_rule: AnRuleArg,
    #[arg(long, value_enum, default_value = "ordinary")]
    pub threshold_source: SourceArg,
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, default_value_t = 400)]
    pub reps: usize,
    #[arg(long, default_value_t = 300)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[arg(long)]
    pub seed: u64,
    /// Directory receiving report.csv, report.json and summary.txt.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}
