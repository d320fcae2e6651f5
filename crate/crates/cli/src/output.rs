use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliResult;

/// Echo of the invocation written at the top of every output file.
#[derive(Debug, Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: &'a C,
}

impl<'a, C: Serialize> Metadata<'a, C> {
    pub fn new(command: &'a str, seed: Option<u64>, config: &'a C) -> Self {
        Self {
            tool: "wildqr",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
        }
    }
}

#[derive(Serialize)]
struct Document<'a, M: Serialize, R: Serialize> {
    metadata: &'a M,
    result: &'a R,
}

pub fn json_document<M: Serialize, R: Serialize>(metadata: &M, result: &R) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&Document { metadata, result })?;
    s.push('\n');
    Ok(s)
}

/// CSV body preceded by `# key: value` lines; values are JSON encoded.
pub fn csv_document<M: Serialize>(
    metadata: &M,
    extra: &[(&str, serde_json::Value)],
    header: &[&str],
    rows: &[Vec<String>],
) -> CliResult<String> {
    let mut out = String::new();
    out.push_str(&format!("# metadata: {}\n", serde_json::to_string(metadata)?));
    for (k, v) in extra {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
