//! Simulation design, oracle covariance and the coverage study.

pub mod design;
pub mod oracle;
pub mod study;

pub use design::PaperDesign;
pub use oracle::{oracle_cov, oracle_cov_for, OracleCovariance};
pub use study::{run_study, AnRule, Method, MethodReport, Selector, SimReport, StudyConfig, TuningOptions};
