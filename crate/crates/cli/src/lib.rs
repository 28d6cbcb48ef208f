//! Scenario-driven front end for `jcsim-core`: strict JSON configs in,
//! CSV tables plus a JSON manifest out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{validate, ValidationReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] jcsim_core::Error),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("determinism check failed: {0}")]
    NotDeterministic(String),
}

impl CliError {
    pub fn config(field: &str, msg: &str) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::NotDeterministic(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Steady-state spectra over Δ_L, Δ_C and power sweeps.
    Spectrum,
    /// g²(τ) trace, its FFT peaks and smoothed g²(0).
    G2,
    /// Two-laser g² spectroscopy.
    G2spec,
    /// Closed-form weak-drive quantities.
    Oracle,
    /// Mirror stack reflectance.
    Tmm,
    /// Fit (g, κ, γ) to a measured spectrum.
    Fit,
    /// Check a config without running it.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::G2 => "g2",
            Command::G2spec => "g2spec",
            Command::Oracle => "oracle",
            Command::Tmm => "tmm",
            Command::Fit => "fit",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads for sweeps; `None` uses all cores.
    pub threads: Option<usize>,
    /// Run twice and require byte-identical tables.
    pub seed_check: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub warnings: Vec<String>,
}

/// Runs one simulation command and writes its outputs under `opts.out_dir`.
pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let text = std::fs::read(config_path).map_err(|e| CliError::io(config_path, e))?;
    let cfg = config::load(config_path)?;
    let plan = commands::plan(command, &cfg, config_path)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    let threads = pool.current_num_threads();

    let artifacts = pool.install(|| commands::execute(&plan))?;
    let runs = if opts.seed_check {
        let again = pool.install(|| commands::execute(&plan))?;
        if let Some(name) = first_difference(&artifacts.tables, &again.tables) {
            return Err(CliError::NotDeterministic(format!("{name} differs between two identical runs")));
        }
        2
    } else {
        1
    };

    let output::Artifacts { tables, resolved, results, diagnostics, warnings } = artifacts;
    let manifest_path = output::write_outputs(&opts.out_dir, &tables, |outputs| output::RunManifest {
        tool: "jcsim",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name().into(),
        config_path: config_path.display().to_string(),
        config_sha256: output::sha256_hex(&text),
        threads,
        determinism_runs: runs,
        wall_clock_s: started.elapsed().as_secs_f64(),
        resolved,
        outputs,
        results,
        diagnostics,
        warnings: warnings.clone(),
    })?;
    Ok(RunOutcome { manifest_path, warnings })
}

fn first_difference(a: &[output::Table], b: &[output::Table]) -> Option<String> {
    if a.len() != b.len() {
        return Some("table list".into());
    }
    a.iter().zip(b).find(|(x, y)| x != y).map(|(x, _)| x.name.clone())
}
