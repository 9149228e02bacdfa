//! `build-matrix`: discretized-Gaussian system matrix generation.

use anyhow::Result;
use clap::Args as ClapArgs;
use mlem_core::io;
use mlem_core::system::{build_gaussian_system_matrix, validate_rows};
use serde::Serialize;

use super::Ctx;
use crate::plot;

#[derive(Debug, ClapArgs, Serialize)]
pub struct Args {
    /// Number of tissue pixels (matrix rows).
    #[arg(long)]
    pub pixels: usize,

    /// Number of detector pairs (matrix columns).
    #[arg(long)]
    pub detectors: usize,

    /// Spread of the detection kernel at unit depth; pixel m uses
    /// sigma/sqrt(m).
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: f64,

    /// Output file name, relative to the output directory.
    #[arg(long, default_value = "system_matrix.csv")]
    pub output: String,

    /// Skip the heatmap rendering.
    #[arg(long)]
    pub no_plot: bool,
}

pub fn run(args: &Args, ctx: &mut Ctx) -> Result<()> {
    // The negated form also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(args.sigma > 0.0) {
        anyhow::bail!("--sigma must be positive, got {}", args.sigma);
    }
    let system = ctx.stage("build", |_| {
        Ok(build_gaussian_system_matrix::<f64>(
            args.pixels,
            args.detectors,
            args.sigma,
        )?)
    })?;

    let report = validate_rows(system.matrix());
    let path = ctx.write_with(&args.output, |p| io::write_system_matrix(p, &system))?;
    println!(
        "wrote {} ({} pixels x {} detectors, {report})",
        path.display(),
        system.n_pixels(),
        system.n_detectors()
    );

    if !args.no_plot {
        let rows: Vec<Vec<f64>> = (0..system.n_pixels())
            .map(|b| system.row(b).to_vec())
            .collect();
        let svg = plot::heatmap(
            &format!("detection probabilities, sigma = {}", args.sigma),
            &rows,
        );
        let name = args
            .output
            .strip_suffix(".csv")
            .unwrap_or(&args.output)
            .to_string()
            + ".svg";
        ctx.write_text(&name, &svg)?;
    }
    Ok(())
}
