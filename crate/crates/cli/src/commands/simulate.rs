//! `simulate`: draw one Poisson count vector from a known charge profile.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;
use mlem_core::io;
use mlem_core::sim::sample_counts;
use mlem_core::system::ExposureScale;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Ctx;

#[derive(Debug, ClapArgs, Serialize)]
pub struct Args {
    /// System matrix CSV.
    #[arg(long)]
    pub matrix: PathBuf,

    /// True charge profile CSV (per-unit-exposure scale).
    #[arg(long)]
    pub lambda: PathBuf,

    /// Exposure scale T; expected counts are T * P'lambda.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Output file name, relative to the output directory.
    #[arg(long, default_value = "counts.csv")]
    pub output: String,
}

pub fn run(args: &Args, ctx: &mut Ctx) -> Result<()> {
    let system = ctx.read_matrix(&args.matrix)?;
    let lambda = ctx.read_lambda(&args.lambda)?;
    let t = ExposureScale::new(args.t)?;

    // Stream 0 of this seed: the counts equal the first run of a
    // Monte-Carlo experiment with the same seed.
    let counts = ctx.stage("sample", |_| {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(0);
        Ok(sample_counts(&system, &lambda, t, &mut rng)?)
    })?;

    let path = ctx.write_with(&args.output, |p| io::write_counts(p, &counts))?;
    println!(
        "wrote {} ({} detectors, {} events)",
        path.display(),
        counts.len(),
        counts.total()
    );
    Ok(())
}
