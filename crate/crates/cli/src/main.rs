//! `mlem`: command-line front end for the `mlem-core` reconstruction and
//! uncertainty library.
//!
//! Every invocation writes a `manifest.json` into the output directory —
//! also on failure, with the error recorded — so a run can always be traced
//! back to its exact configuration and seed.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 degenerate
//! input (positive counts on zero projected mass), 4 numerical failure
//! (singular information matrix or an invalid finite-difference step).

mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Ctx;
use manifest::{RunManifest, StageTiming};

#[derive(Debug, Parser)]
#[command(
    name = "mlem",
    version,
    about = "Poisson emission reconstruction with closed-form uncertainty"
)]
struct Cli {
    /// Output directory for all artifacts (default: $MLEM_OUT_DIR or `.`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Cap the global thread pool (Monte-Carlo runs are the only
    /// concurrent stage; results do not depend on this value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Debug, Subcommand)]
enum Commands {
    /// Build the Gaussian pixel/detector system matrix and write it as CSV.
    BuildMatrix(commands::build_matrix::Args),
    /// Sample Poisson detector counts from a system matrix and a true charge profile.
    Simulate(commands::simulate::Args),
    /// Reconstruct a charge profile from counts by multiplicative EM.
    Reconstruct(commands::reconstruct::Args),
    /// Closed-form uncertainty report (information matrix, SEs, correlations).
    Uncertainty(commands::uncertainty::Args),
    /// Monte-Carlo study of a scenario file, compared against the closed form.
    Montecarlo(commands::montecarlo::Args),
    /// Run the reference experiment end to end and print an acceptance summary.
    Reproduce(commands::reproduce::Args),
}

impl Commands {
    fn name(&self) -> &'static str {
        match self {
            Commands::BuildMatrix(_) => "build-matrix",
            Commands::Simulate(_) => "simulate",
            Commands::Reconstruct(_) => "reconstruct",
            Commands::Uncertainty(_) => "uncertainty",
            Commands::Montecarlo(_) => "montecarlo",
            Commands::Reproduce(_) => "reproduce",
        }
    }

    fn config(&self) -> serde_json::Value {
        let result = match self {
            Commands::BuildMatrix(a) => serde_json::to_value(a),
            Commands::Simulate(a) => serde_json::to_value(a),
            Commands::Reconstruct(a) => serde_json::to_value(a),
            Commands::Uncertainty(a) => serde_json::to_value(a),
            Commands::Montecarlo(a) => serde_json::to_value(a),
            Commands::Reproduce(a) => serde_json::to_value(a),
        };
        result.unwrap_or(serde_json::Value::Null)
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Commands::Simulate(a) => Some(a.seed),
            Commands::Montecarlo(a) => a.seed,
            Commands::Reproduce(a) => Some(a.seed),
            _ => None,
        }
    }

    fn run(&self, ctx: &mut Ctx) -> Result<()> {
        match self {
            Commands::BuildMatrix(a) => commands::build_matrix::run(a, ctx),
            Commands::Simulate(a) => commands::simulate::run(a, ctx),
            Commands::Reconstruct(a) => commands::reconstruct::run(a, ctx),
            Commands::Uncertainty(a) => commands::uncertainty::run(a, ctx),
            Commands::Montecarlo(a) => commands::montecarlo::run(a, ctx),
            Commands::Reproduce(a) => commands::reproduce::run(a, ctx),
        }
    }
}

/// Maps library failures onto the documented exit codes.
pub(crate) fn exit_code_for(err: &mlem_core::Error) -> u8 {
    match err {
        mlem_core::Error::DegenerateSupport { .. } => 3,
        mlem_core::Error::IllConditioned { .. } | mlem_core::Error::FdStepTooLarge { .. } => 4,
        _ => 2,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<mlem_core::Error>() {
            return exit_code_for(core);
        }
    }
    2
}

fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("MLEM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`mlem ... | head`) like any Unix tool,
    // instead of panicking inside println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let out_dir = resolve_out_dir(cli.out_dir);
    if let Err(e) =
        std::fs::create_dir_all(&out_dir).context("could not create the output directory")
    {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }

    let start = Instant::now();
    let mut manifest =
        RunManifest::new(cli.command.name(), cli.command.config(), cli.command.seed());
    let mut ctx = Ctx {
        out_dir: out_dir.clone(),
        manifest: &mut manifest,
    };
    let result = cli.command.run(&mut ctx);

    manifest.timings.push(StageTiming {
        stage: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            manifest.error = Some(format!("{e:#}"));
            eprintln!("error: {e:#}");
            exit_code(e)
        }
    };
    match manifest.write(&out_dir) {
        Ok(path) => {
            if code == 0 {
                println!("manifest: {}", path.display());
            }
        }
        Err(e) => {
            eprintln!("error: could not write the run manifest: {e:#}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
