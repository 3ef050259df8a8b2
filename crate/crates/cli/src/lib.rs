//! Scenario files, subcommands and deterministic output for the `nmqfi` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

pub use commands::{execute, Command};
pub use config::{load, parse, Scenario};
pub use output::{Format, Output, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("scenario {scenario}: {source}")]
    Numerical {
        scenario: String,
        #[source]
        source: nmqfi::Error,
    },
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Load, execute and render. `seed` overrides `options.seed`.
pub fn run_to_string(cmd: Command, config_path: &Path, format: Option<Format>, seed: Option<u64>) -> Result<String, CliError> {
    let mut sc = load(config_path)?;
    if let Some(s) = seed {
        sc.config.options.seed = s;
    }
    let out = execute(cmd, &sc)?;
    Ok(out.render(format.unwrap_or(cmd.default_format())))
}

pub fn run(cmd: Command, config_path: &Path, out: Option<&Path>, format: Option<Format>, seed: Option<u64>) -> Result<(), CliError> {
    let text = run_to_string(cmd, config_path, format, seed)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
