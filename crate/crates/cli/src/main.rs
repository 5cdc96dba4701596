//! Batch front end: parse a scenario configuration, run solve / sweep /
//! svf / geug / validate, and emit CSV results.

mod commands;
mod config;
mod fmt;

use clap::{Parser, Subcommand};
use commands::{Failure, Metric};
use config::Params;
use std::path::PathBuf;

/// Environment variable supplying the default sweep worker count.
const WORKERS_ENV: &str = "FIXTERM_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "fixterm",
    version,
    about = "Optimal consumption and investment with a fixed-term asset, a consumption floor, and a terminal guarantee",
    after_help = "Exit codes: 0 success, 1 usage or configuration error, 2 infeasible capital, 3 numerical failure, 4 validation failure."
)]
struct Cli {
    /// TOML configuration file; omitted keys use the base-case values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Also write the output to this file (same bytes as stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Override the [numerics].seed value.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for sweeps (default: FIXTERM_WORKERS, then all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the configured scenario and print one CSV summary row.
    Solve,
    /// Evaluate metrics over a grid of values for one parameter.
    Sweep {
        /// Parameter to vary: T, r, mu, sigma, mu_f, sigma_f, p1, p2,
        /// c_floor, v_floor, v0.
        #[arg(long, value_name = "NAME")]
        param: String,
        /// Comma-separated grid values.
        #[arg(long, value_name = "V1,V2,...")]
        grid: String,
        /// Comma-separated subset of osiw, svf, geug, value, psi_star,
        /// v1_star, v2_star (default: all; empty: header only).
        #[arg(long, value_name = "LIST")]
        metrics: Option<String>,
    },
    /// Print the subjective value of the fixed-term asset.
    Svf,
    /// Print the guarantee-equivalent utility gain.
    Geug,
    /// Run the Monte-Carlo and derivative cross-check suite.
    Validate,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(failure) = run(cli) {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            Failure::Input(format!("cannot read config {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    let doc = config::parse(&text).map_err(Failure::Input)?;
    let mut params = Params::from_doc(&doc);
    if let Some(seed) = cli.seed {
        params.numerics.seed = seed;
    }
    let workers = worker_count(cli.workers);

    let output = match &cli.command {
        Command::Solve => commands::run_solve(&params)?,
        Command::Sweep {
            param,
            grid,
            metrics,
        } => {
            let grid = commands::parse_grid(grid)?;
            let metrics = commands::parse_metrics(metrics.as_deref())?;
            commands::run_sweep(&params, param, &grid, &metrics, workers)?
        }
        Command::Svf => commands::run_single_metric(&params, Metric::Svf)?,
        Command::Geug => commands::run_single_metric(&params, Metric::Geug)?,
        Command::Validate => {
            let (report, failed) = commands::run_validate(&params)?;
            emit(&cli, &report)?;
            if failed.is_empty() {
                return Ok(());
            }
            return Err(Failure::Validation(format!(
                "validation failed: {}",
                failed.join(", ")
            )));
        }
    };
    emit(&cli, &output)
}

/// Print to stdout and mirror to `--out` when given.
fn emit(cli: &Cli, output: &str) -> Result<(), Failure> {
    print!("{output}");
    if let Some(path) = &cli.out {
        std::fs::write(path, output).map_err(|e| {
            Failure::Input(format!("cannot write output {}: {e}", path.display()))
        })?;
    }
    Ok(())
}

/// Worker-count precedence: --workers flag, then FIXTERM_WORKERS, then
/// let the thread pool pick (0 = one per core).
fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    })
    .unwrap_or(0)
}
