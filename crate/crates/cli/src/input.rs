use std::path::Path;

use wildqr::Dataset;

use crate::error::{CliError, CliResult};

/// Reads a comma-separated file whose first column is the response.
/// Empty and non-numeric cells are rejected with their position.
pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    read_from(file, &path.display().to_string())
}

pub fn read_from<R: std::io::Read>(reader: R, label: &str) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{label}: unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{label}: missing header row")));
    }
    if let Some(c) = headers.iter().position(String::is_empty) {
        return Err(CliError::Data(format!("{label}: column {} has an empty name", c + 1)));
    }
    let k = headers.len();
    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); k - 1];
    for (i, rec) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Data(format!("{label}: line {line}: {e}")))?;
        if rec.len() != k {
            return Err(CliError::Data(format!(
                "{label}: line {line} has {} fields, header has {k}",
                rec.len()
            )));
        }
        for (c, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                return Err(CliError::Data(format!(
                    "{label}: missing value at line {line}, column '{}'",
                    headers[c]
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{label}: non-numeric value '{cell}' at line {line}, column '{}'",
                    headers[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{label}: non-finite value '{cell}' at line {line}, column '{}'",
                    headers[c]
                )));
            }
            if c == 0 {
                y.push(v);
            } else {
                cols[c - 1].push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::Data(format!("{label}: no data rows")));
    }
    Ok(Dataset::from_columns(y, &cols, headers[1..].to_vec())?)
}
