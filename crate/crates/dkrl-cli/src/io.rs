//! File helpers shared by the commands. Floats are written with shortest
//! round-trip formatting so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dkrl_core::numerics::DenseMatrix;
use dkrl_core::simdata;

use crate::error::{CliError, Result};

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {}", path.display(), e)))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {}", path.display(), e)))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    simdata::write_matrix_csv(path, m).map_err(CliError::from)
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    if !path.exists() {
        return Err(CliError::Data(format!("missing file {}", path.display())));
    }
    simdata::load_embeddings(path, false).map_err(CliError::from)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = String::new();
    for x in v {
        let _ = writeln!(out, "{x}");
    }
    write_string(path, &out)
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let m = load_matrix(path)?;
    if m.cols() != 1 {
        return Err(CliError::Data(format!(
            "{} must have one column, found {}",
            path.display(),
            m.cols()
        )));
    }
    Ok(m.column(0))
}

pub fn write_indices(path: &Path, arms: &[usize], users: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (a, u) in arms.iter().zip(users) {
        let _ = writeln!(out, "{a},{u}");
    }
    write_string(path, &out)
}

/// Type-7 (linear interpolation) quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(values, 0.5)
}
