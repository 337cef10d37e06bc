//! Command-line front end for the levi-hull solvers.

// `!(x <= tol)` is deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use levi_hull::export::ExportFormat;

use crate::commands::{
    cmd_export, cmd_foliate, cmd_indices, cmd_locus, cmd_solve_disk, parse_t, parse_t_list, with_workers, worker_count,
    Inputs,
};
use crate::error::{error_report, exit_code, EXIT_INVARIANT, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "levi-hull",
    version,
    about = "Analytic disks, Levi-flat hulls and partial indices for perturbed spheres"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Perturbation spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one attached disk.
    SolveDisk {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated parameter, e.g. "0.3,0.2".
        #[arg(long, allow_hyphen_values = true)]
        t: String,
    },
    /// Build the foliation atlas over the parameter ball.
    Foliate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Trace the CR-singular locus.
    Locus {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Certify partial indices at the parameters listed in a file.
    Indices {
        #[command(flatten)]
        run: RunArgs,
        /// One comma-separated parameter per line.
        #[arg(long = "t-list")]
        t_list: PathBuf,
        /// Atlas JSON used for initial guesses; rewritten with the reports.
        #[arg(long)]
        atlas: Option<PathBuf>,
    },
    /// Convert an atlas JSON file.
    Export {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: ExportFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> std::result::Result<ExportFormat, String> {
    s.parse().map_err(|e: levi_hull::Error| e.to_string())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveDisk { run, t } => {
            let inputs = Inputs::load(&run.config, &run.spec, run.out.as_deref())?;
            let t = parse_t(&t, inputs.config.dimension)?;
            let workers = worker_count(inputs.config.workers)?;
            with_workers(workers, || cmd_solve_disk(&inputs, &t)).map(drop)
        }
        Command::Foliate { run } => {
            let inputs = Inputs::load(&run.config, &run.spec, run.out.as_deref())?;
            let workers = worker_count(inputs.config.workers)?;
            with_workers(workers, || cmd_foliate(&inputs)).map(drop)
        }
        Command::Locus { run } => {
            let inputs = Inputs::load(&run.config, &run.spec, run.out.as_deref())?;
            let workers = worker_count(inputs.config.workers)?;
            with_workers(workers, || cmd_locus(&inputs)).map(drop)
        }
        Command::Indices { run, t_list, atlas } => {
            let inputs = Inputs::load(&run.config, &run.spec, run.out.as_deref())?;
            let list = parse_t_list(&t_list, inputs.config.dimension)?;
            let workers = worker_count(inputs.config.workers)?;
            with_workers(workers, || cmd_indices(&inputs, &list, atlas.as_deref())).map(drop)
        }
        Command::Export { atlas, format, output } => cmd_export(&atlas, format, output.as_deref()).map(drop),
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match catch_unwind(AssertUnwindSafe(|| execute(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(err)) => {
            eprintln!("{}", error_report(&err));
            exit_code(&err)
        }
        Err(_) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": "InternalError", "message": "panic", "exit_code": EXIT_INVARIANT })
            );
            EXIT_INVARIANT
        }
    }
}
