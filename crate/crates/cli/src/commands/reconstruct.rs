//! `reconstruct`: run the multiplicative EM iteration on observed counts.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;
use mlem_core::em::{run_em, EmConfig};
use mlem_core::fisher::mle_condition_residual;
use mlem_core::io;
use mlem_core::system::ChargeVector;
use serde::Serialize;

use super::Ctx;

#[derive(Debug, ClapArgs, Serialize)]
pub struct Args {
    /// System matrix CSV.
    #[arg(long)]
    pub matrix: PathBuf,

    /// Observed detector counts CSV.
    #[arg(long)]
    pub counts: PathBuf,

    /// Iteration budget.
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,

    /// Early-stop threshold on the fixed-point residual (0 disables).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tolerance: f64,

    /// Initial profile: `uniform`, or a path to a charge CSV.
    #[arg(long, default_value = "uniform")]
    pub init: String,

    /// Output file name, relative to the output directory.
    #[arg(long, default_value = "lambda_hat.csv")]
    pub output: String,

    /// Also write every iterate (`trajectory.csv`).
    #[arg(long)]
    pub trajectory: bool,
}

pub fn run(args: &Args, ctx: &mut Ctx) -> Result<()> {
    let system = ctx.read_matrix(&args.matrix)?;
    let counts = ctx.read_counts(&args.counts)?;
    let init = if args.init == "uniform" {
        ChargeVector::default_init(system.n_pixels(), &counts)?
    } else {
        let path = PathBuf::from(&args.init);
        ctx.read_lambda(&path)?
    };

    let config = EmConfig {
        max_iterations: args.iterations,
        stop_tolerance: args.tolerance,
        record_log_likelihood: true,
        record_trajectory: args.trajectory,
    };
    let em_run = ctx.stage("reconstruct", |_| {
        Ok(run_em(&system, &counts, &init, &config)?)
    })?;
    let lambda_hat = &em_run.final_state.lambda;

    let path = ctx.write_with(&args.output, |p| io::write_charge_vector(p, lambda_hat))?;

    // Score residual at the solution (zero exactly at an interior MLE).
    let residual = mle_condition_residual(&system, &counts, lambda_hat)?;
    let max_residual = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    ctx.write_with("score_residual.csv", |p| {
        io::write_pixel_table(
            p,
            &[(
                "score_residual",
                residual.iter().map(|&r| Some(r)).collect(),
            )],
        )
    })?;

    if let Some(lls) = &em_run.log_likelihood_trace {
        let mut trace = String::from("# columns=iterate,log_likelihood\n");
        for (i, ll) in lls.iter().enumerate() {
            let _ = writeln!(trace, "{i},{}", io::fmt_float(*ll));
        }
        ctx.write_text("log_likelihood.csv", &trace)?;
    }

    if let Some(iterates) = &em_run.trajectory {
        ctx.write_with("trajectory.csv", |p| io::write_trajectory(p, iterates))?;
    }

    println!(
        "wrote {} after {} iterations ({}converged, residual max-norm {:.3e}, log-likelihood {:.6})",
        path.display(),
        em_run.iterations_run,
        if em_run.converged { "" } else { "not " },
        max_residual,
        em_run.final_state.log_likelihood
    );
    Ok(())
}
