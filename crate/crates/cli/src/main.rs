//! `dncboot`: divide-and-conquer kernel ridge regression with bootstrap
//! confidence bands, from the command line.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{Grid, RunConfig};
use crate::error::{CliError, Result};

const OUT_ENV: &str = "DNCBOOT_OUT_DIR";
const DEFAULT_OUT: &str = "dncboot-out";

#[derive(Parser, Debug)]
#[command(name = "dncboot", version, about, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file (TOML with dotted keys).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override one config value, e.g. `--set kernel.lengthscale=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory. Defaults to the config value, then $DNCBOOT_OUT_DIR,
    /// then `./dncboot-out`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the averaged estimator and write predictions.csv.
    Fit(DataArgs),
    /// Fit, bootstrap and calibrate; write bands.csv.
    Bands {
        #[command(flatten)]
        data: DataArgs,
        /// Also write the bootstrap deviations to deltas.csv.
        #[arg(long)]
        deltas: bool,
    },
    /// Monte Carlo coverage over the (P, T) grid; write coverage.csv.
    Coverage {
        #[command(flatten)]
        grid: GridArgs,
        /// Add diagnostic columns to the coverage CSV.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Sup-norm error against sample size; write rate.csv.
    Rate,
    /// Spectral checks; write diagnostics.csv and interpolation.csv.
    Diagnostics,
    /// Validate the config and report the planned work without computing.
    DryRun {
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Data CSV with a header row, covariate columns and then y.
    /// Without one a sample is simulated from the dgp settings.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Use the full 7 x 9 grid (P = 64..4096, T = 2..512) at N = 65536
    /// with 2000 trials per cell.
    #[arg(long)]
    full: bool,
}

fn resolve_out(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or(config)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn run(cli: Cli) -> Result<()> {
    let Common {
        config,
        overrides,
        seed,
        out,
        threads,
    } = cli.common;

    let mut overrides = overrides;
    if let Command::Coverage { grid, .. } | Command::DryRun { grid } = &cli.command {
        if grid.full {
            let g = Grid::full();
            overrides.extend([
                format!("grid.parts={:?}", g.parts),
                format!("grid.sizes={:?}", g.sizes),
                "dgp.n=65536".to_string(),
                "coverage.trials=2000".to_string(),
            ]);
        }
    }
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    let mut cfg = RunConfig::load(config.as_deref(), &overrides)?;
    let out_dir = resolve_out(out, cfg.output.dir.take());
    cfg.output.dir = Some(out_dir.clone());

    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("could not size the thread pool: {e}")))?;
    }

    let data = match &cli.command {
        Command::Fit(d) | Command::Bands { data: d, .. } => d.data.clone(),
        _ => None,
    };
    let ctx = Context {
        config: cfg,
        out_dir,
        data,
    };
    match cli.command {
        Command::Fit(_) => commands::fit(&ctx),
        Command::Bands { deltas, .. } => commands::bands(&ctx, deltas),
        Command::Coverage { diagnostics, .. } => commands::coverage(&ctx, diagnostics),
        Command::Rate => commands::rate(&ctx),
        Command::Diagnostics => commands::diagnostics(&ctx),
        Command::DryRun { .. } => commands::dry_run(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
