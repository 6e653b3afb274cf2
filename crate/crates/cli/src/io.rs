//! Long-form dataset and label files.
//!
//! Datasets are CSV with header `obs,row,col,value`: one line per matrix
//! entry, 0-based indices, obs ids contiguous and every (obs,row,col) cell
//! present exactly once. Values are written with 17 significant digits so a
//! write–read round trip is bit exact. Labels are CSV `obs,label` with −1
//! meaning unlabelled. All writes go through a temp file plus rename.

use crate::{CliError, CliResult};
use matmix_core::data::DataSet;
use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn atomic_write(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("renaming into {}: {e}", path.display())))?;
    Ok(())
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

/// 17-significant-digit decimal form; round-trips every f64.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_dataset(path: &Path, data: &DataSet) -> CliResult<()> {
    let mut out = String::with_capacity(data.len() * data.n() * data.p() * 32);
    out.push_str("obs,row,col,value\n");
    for (i, x) in data.iter().enumerate() {
        for r in 0..data.n() {
            for c in 0..data.p() {
                let _ = writeln!(out, "{i},{r},{c},{}", format_value(x[(r, c)]));
            }
        }
    }
    atomic_write(path, &out)
}

pub fn read_dataset(path: &Path) -> CliResult<DataSet> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("obs,row,col,value") => {}
        other => {
            return Err(CliError::Schema(format!(
                "{}: expected header 'obs,row,col,value', got {other:?}",
                path.display()
            )))
        }
    }
    let mut triples: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |field: Option<&str>, what: &str| -> CliResult<f64> {
            field
                .ok_or_else(|| {
                    CliError::Schema(format!("{} line {}: missing {what}", path.display(), lineno + 2))
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| {
                    CliError::Schema(format!("{} line {}: bad {what}: {e}", path.display(), lineno + 2))
                })
        };
        let obs = parse(parts.next(), "obs")? as usize;
        let row = parse(parts.next(), "row")? as usize;
        let col = parse(parts.next(), "col")? as usize;
        let value = parse(parts.next(), "value")?;
        if parts.next().is_some() {
            return Err(CliError::Schema(format!(
                "{} line {}: too many fields",
                path.display(),
                lineno + 2
            )));
        }
        triples.push((obs, row, col, value));
    }
    if triples.is_empty() {
        return Err(CliError::Schema(format!("{}: no data rows", path.display())));
    }
    let n_obs = triples.iter().map(|t| t.0).max().unwrap() + 1;
    let n = triples.iter().map(|t| t.1).max().unwrap() + 1;
    let p = triples.iter().map(|t| t.2).max().unwrap() + 1;
    if triples.len() != n_obs * n * p {
        return Err(CliError::Schema(format!(
            "{}: {} cells for {} observations of {}x{} (grid incomplete or duplicated)",
            path.display(),
            triples.len(),
            n_obs,
            n,
            p
        )));
    }
    let mut seen = vec![false; n_obs * n * p];
    let mut mats = vec![DMatrix::<f64>::zeros(n, p); n_obs];
    for (obs, row, col, value) in triples {
        let idx = (obs * n + row) * p + col;
        if seen[idx] {
            return Err(CliError::Schema(format!(
                "{}: duplicate cell (obs {obs}, row {row}, col {col})",
                path.display()
            )));
        }
        seen[idx] = true;
        mats[obs][(row, col)] = value;
    }
    DataSet::new(mats).map_err(|e| CliError::Schema(e.to_string()))
}

pub fn write_labels(path: &Path, labels: &[i32]) -> CliResult<()> {
    let mut out = String::from("obs,label\n");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    atomic_write(path, &out)
}

pub fn read_labels(path: &Path, expected_len: Option<usize>) -> CliResult<Vec<i32>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("obs,label") => {}
        other => {
            return Err(CliError::Schema(format!(
                "{}: expected header 'obs,label', got {other:?}",
                path.display()
            )))
        }
    }
    let mut pairs: Vec<(usize, i32)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            CliError::Schema(format!("{} line {}: expected obs,label", path.display(), lineno + 2))
        })?;
        let obs: usize = a.trim().parse().map_err(|e| {
            CliError::Schema(format!("{} line {}: bad obs: {e}", path.display(), lineno + 2))
        })?;
        let label: i32 = b.trim().parse().map_err(|e| {
            CliError::Schema(format!("{} line {}: bad label: {e}", path.display(), lineno + 2))
        })?;
        pairs.push((obs, label));
    }
    pairs.sort_unstable();
    for (i, (obs, _)) in pairs.iter().enumerate() {
        if *obs != i {
            return Err(CliError::Schema(format!(
                "{}: label obs ids must be contiguous from 0 (missing {i})",
                path.display()
            )));
        }
    }
    if let Some(n) = expected_len {
        if pairs.len() != n {
            return Err(CliError::Schema(format!(
                "{}: {} labels for {n} observations",
                path.display(),
                pairs.len()
            )));
        }
    }
    Ok(pairs.into_iter().map(|(_, l)| l).collect())
}
