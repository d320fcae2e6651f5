#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wildqr::{PaperDesign, QuantileLevel};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wildqr"));
    c.env_remove("WILDQR_THREADS");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a draw from the simulation design as `y,X1,...,X10`.
pub fn design_csv(dir: &Path, n: usize, tau: f64, seed: u64) -> PathBuf {
    let design = PaperDesign::new(n, QuantileLevel::new(tau).unwrap()).unwrap();
    let (data, _) = design.generate(seed).unwrap();
    let mut s = String::from("y");
    for j in 1..=10 {
        s.push_str(&format!(",X{j}"));
    }
    s.push('\n');
    for i in 0..data.n() {
        s.push_str(&format!("{:?}", data.y()[i]));
        for v in &data.row(i)[1..] {
            s.push_str(&format!(",{v:?}"));
        }
        s.push('\n');
    }
    let path = dir.join(format!("design_{n}_{seed}.csv"));
    std::fs::write(&path, s).unwrap();
    path
}

pub fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}
