//! Command-line pipeline: validate inputs, assess with model providers,
//! score with the quality model, and evaluate against ground truth.

pub mod commands;
pub mod manifest;
pub mod simulate;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trustlens", version, about = "Secure-coding-practice assessment and trustworthiness scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Quality-model config overriding the manifest's.
    #[arg(long = "qm-config")]
    pub qm_config: Option<PathBuf>,
    /// Output directory overriding the manifest's.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check every input named by the manifest.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Run assessment sweeps and write run files.
    Assess {
        #[command(flatten)]
        common: Common,
        /// baseline | cwe | callctx | rules | score-est; all manifest strategies when omitted.
        #[arg(long)]
        strategy: Option<String>,
        /// Model id from the manifest; all models when omitted.
        #[arg(long)]
        model: Option<String>,
        /// Serve every prompt from the cache; a miss is an item error.
        #[arg(long)]
        replay: bool,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Compute trust scores for runs and for the ground truth.
    Score {
        #[command(flatten)]
        common: Common,
        /// A single run file to score; defaults to the reference plus every run in the output tree.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Metrics, heatmaps, MAE, boxplots and the separation test.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        allow_incomplete: bool,
    },
    /// Evaluation plus a markdown summary over all runs.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        allow_incomplete: bool,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_VALIDATION;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match commands::execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
