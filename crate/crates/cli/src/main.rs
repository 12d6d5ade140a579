//! `qkrylov`: batch front-end for the subspace-diagonalization library.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] qkrylov::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use qkrylov::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Library(e) => match e {
                E::Parse { .. }
                | E::QubitMismatch { .. }
                | E::DenseLimit { .. }
                | E::NotNormalized(_)
                | E::NotOrthogonal(_)
                | E::SymmetrySector(_)
                | E::InvalidArgument(_) => 2,
                _ => 3,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            _ => "numerical",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qkrylov", version, about = "Quantum Krylov and filter subspace experiments on a dense simulator")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// INI config file; omitted means all defaults.
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// `section.key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Convergence trace for one method (CSV + JSON).
    Run(Common),
    /// Dense spectrum of the configured model.
    Spectrum(Common),
    /// One summary row per value of the sweep axis.
    Sweep(Common),
    /// Score filter-grid candidates on a single Krylov measurement.
    Hyperopt(Common),
    /// Recorded device calls of a finished run against the predicted count.
    Ledger(Common),
}

fn resolve(common: &Common) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::defaults(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(dir) = &common.output {
        cfg.set("output.dir", &dir.to_string_lossy())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, common) = match &cli.verb {
        Verb::Run(c) => ("run", c),
        Verb::Spectrum(c) => ("spectrum", c),
        Verb::Sweep(c) => ("sweep", c),
        Verb::Hyperopt(c) => ("hyperopt", c),
        Verb::Ledger(c) => ("ledger", c),
    };
    let result = resolve(common).and_then(|cfg| match cli.verb {
        Verb::Run(_) => commands::run(&cfg),
        Verb::Spectrum(_) => commands::spectrum(&cfg),
        Verb::Sweep(_) => commands::sweep(&cfg),
        Verb::Hyperopt(_) => commands::hyperopt(&cfg),
        Verb::Ledger(_) => commands::ledger(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let report = serde_json::json!({
                "command": name,
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
