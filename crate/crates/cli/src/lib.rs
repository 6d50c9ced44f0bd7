//! Config-driven runner for the verification suites of `heis-area`.
//!
//! Exit codes: 0 when every verdict passes, 1 on a numerical failure, 2 on
//! a configuration or I/O error.

pub mod config;
pub mod output;
pub mod runners;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{BudgetPreset, ExperimentConfig};
use runners::{Context, SuiteResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "heis-area", version, about = "Blow-up and area-formula experiments on Heisenberg groups")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "default")]
    pub budget: BudgetPreset,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Spherical factors of vertical planes.
    SphericalFactor,
    /// Federer and upper densities against tangent-plane factors.
    Blowup,
    /// Area ratio of projections between complementary vertical subgroups.
    ProjectionLemma,
    /// Intrinsic chain rule and graph-kernel identity.
    ChainRule,
    /// All suites, one PASS/FAIL line each.
    VerifyAll,
}

impl Command {
    fn stem(self) -> &'static str {
        match self {
            Command::SphericalFactor => "spherical-factor",
            Command::Blowup => "blowup",
            Command::ProjectionLemma => "projection-lemma",
            Command::ChainRule => "chain-rule",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Runs a command and returns the process exit code, printing verdicts to
/// stdout and errors to stderr.
pub fn run(args: &Args) -> i32 {
    match execute(args) {
        Ok(results) => {
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(args: &Args) -> Result<Vec<SuiteResult>, CliError> {
    let config = match &args.config {
        Some(p) => config::load(p)?,
        None => config::parse("{}")?,
    };
    let out = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = args.seed.or(config.seed).unwrap_or(0);
    // validate everything the command needs before any estimation starts
    validate(&config, args.command)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let ctx = Context { config, seed, preset: args.budget };
    let results = match args.command {
        Command::SphericalFactor => vec![runners::spherical_factor(&ctx)?],
        Command::Blowup => vec![runners::blowup(&ctx)?],
        Command::ProjectionLemma => vec![runners::projection_lemma(&ctx)?],
        Command::ChainRule => vec![runners::chain_rule(&ctx)?],
        Command::VerifyAll => runners::verify_all(&ctx),
    };
    write_outputs(&out, args.command.stem(), &results)?;
    Ok(results)
}

fn validate(config: &ExperimentConfig, command: Command) -> Result<(), CliError> {
    config.schedule()?;
    let needs_surface = matches!(command, Command::Blowup | Command::ChainRule | Command::VerifyAll);
    if needs_surface && config.surface.is_some() {
        config.surface()?;
    }
    if needs_surface && config.surface.is_none() && config.n != 1 {
        return Err(CliError::Config("surface: required when n != 1".into()));
    }
    if !matches!(command, Command::ProjectionLemma | Command::ChainRule) {
        config.distance()?;
    }
    Ok(())
}

fn write_outputs(out: &Path, stem: &str, results: &[SuiteResult]) -> Result<(), CliError> {
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    output::write_csv(&out.join(format!("{stem}.csv")), &rows)?;
    let profiles: Vec<_> = results.iter().flat_map(|r| r.profiles.iter().cloned()).collect();
    if !profiles.is_empty() {
        output::write_jsonl(&out.join(format!("{stem}-profiles.jsonl")), &profiles)?;
    }
    if results.len() > 1 {
        let summary: String = results
            .iter()
            .map(|r| format!("{} {}: {}\n", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail))
            .collect();
        std::fs::write(out.join(format!("{stem}-summary.txt")), summary).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}
