//! Reproducible experiment harness for the sketched Tucker and tensor-ring
//! solvers: TOML configs, seeded Monte Carlo runs, CSV output.

pub mod config;
pub mod experiment;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use config::{plan_from_str, ExperimentConfig, Method, Plan};
pub use experiment::{run_experiment, sampling_sweep, spectrum_experiment, ExperimentOutcome, RunRecord};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// The configuration violates a constraint; nothing was run.
    #[error("config rejected: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] rbki_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Process exit code: 2 for rejected configs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Renders CSV into memory first so a failure leaves no partial file.
pub fn write_atomically(
    path: &Path,
    render: impl FnOnce(&mut Vec<u8>) -> Result<(), BenchError>,
) -> Result<(), BenchError> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Drops the named column from every CSV line.
pub fn without_column(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let drop = header.split(',').position(|c| c == column);
    let strip = |line: &str| -> String {
        line.split(',')
            .enumerate()
            .filter(|(i, _)| Some(*i) != drop)
            .map(|(_, f)| f)
            .collect::<Vec<_>>()
            .join(",")
    };
    std::iter::once(header)
        .chain(lines)
        .map(|l| strip(l) + "\n")
        .collect()
}
