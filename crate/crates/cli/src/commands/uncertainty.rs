//! `uncertainty`: closed-form observed-information uncertainty for a
//! finished reconstruction, with optional finite-difference cross-check.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args as ClapArgs;
use mlem_core::fisher::{default_fd_epsilon, fisher_fd_oracle, mle_condition_residual};
use mlem_core::io;
use mlem_core::report;
use mlem_core::system::{ChargeVector, ExposureScale};
use mlem_core::uncertainty::noise_to_signal;
use serde::Serialize;

use super::{compute_theoretical, parse_minors, Ctx, TheoBundle};
use crate::plot::{line_chart, Series};

#[derive(Debug, ClapArgs, Serialize)]
pub struct Args {
    /// System matrix CSV.
    #[arg(long)]
    pub matrix: PathBuf,

    /// Observed detector counts CSV.
    #[arg(long)]
    pub counts: PathBuf,

    /// Counts-scale reconstruction CSV (output of `reconstruct`).
    #[arg(long)]
    pub lambda: PathBuf,

    /// Exposure scale T used when the counts were acquired.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,

    /// Minor-inversion window sizes (odd, comma-separated).
    #[arg(long, default_value = "1,3")]
    pub minors: String,

    /// Iteration count that produced the reconstruction (recorded in the
    /// report envelope).
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,

    /// Cross-check the closed form against the Richardson finite-difference
    /// oracle and report the gap.
    #[arg(long)]
    pub fd_check: bool,
}

pub fn run(args: &Args, ctx: &mut Ctx) -> Result<()> {
    let system = ctx.read_matrix(&args.matrix)?;
    let counts = ctx.read_counts(&args.counts)?;
    let lambda_hat = ctx.read_lambda(&args.lambda)?;
    let t = ExposureScale::new(args.t)?;
    let minors = parse_minors(&args.minors, system.n_pixels())?;

    let residual = mle_condition_residual(&system, &counts, &lambda_hat)?;
    let max_residual = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if max_residual > 1e-3 {
        eprintln!(
            "warning: fixed-point residual max-norm is {max_residual:.3e}; the \
             reconstruction is not at an MLE and the reported uncertainty assumes one"
        );
    }

    let bundle = ctx.stage("invert", |_| {
        compute_theoretical(&system, &counts, &lambda_hat, args.t, &minors)
    })?;

    write_report(ctx, "", &bundle, args.t, args.iterations, t, None)?;

    if args.fd_check {
        let gap = ctx.stage("fd-oracle", |_| {
            let eps = default_fd_epsilon(&lambda_hat)?;
            let fd = fisher_fd_oracle(&system, &counts, &lambda_hat, eps, true)?;
            let scale = bundle.fisher.matrix().max_abs();
            let mut gap = 0.0f64;
            for b1 in 0..system.n_pixels() {
                for b2 in 0..system.n_pixels() {
                    gap = gap.max((fd.entry(b1, b2) - bundle.fisher.entry(b1, b2)).abs() / scale);
                }
            }
            Ok(gap)
        })?;
        println!("finite-difference cross-check: max relative gap {gap:.3e}");
    }

    println!("\ncorrelation matrix:");
    print!("{}", report::render_two_digit_matrix(&bundle.corr));
    println!(
        "\ncondition estimate: {:.3e}",
        bundle.cov.condition_estimate()
    );
    Ok(())
}

/// Write the uncertainty artifact set into `prefix/` (or the output root
/// when empty): JSON report, CSV tables, the exported information matrix,
/// and the SE / noise-to-signal charts. An empirical SE overlay is added to
/// the chart when provided.
pub fn write_report(
    ctx: &mut Ctx,
    prefix: &str,
    bundle: &TheoBundle,
    t: f64,
    iterations: usize,
    exposure: ExposureScale<f64>,
    empirical_se: Option<&[f64]>,
) -> Result<()> {
    let pj = |name: &str| {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}/{name}")
        }
    };
    let lambda_pu = ChargeVector::new(bundle.lambda_pu.clone())?;
    let nts = noise_to_signal(&bundle.se_pu, &lambda_pu, exposure)?;

    let json = report::uncertainty_report(
        &bundle.lambda_pu,
        &bundle.se_pu,
        &bundle.minors_pu,
        &bundle.corr,
        &nts,
        t,
        iterations,
        bundle.cov.condition_estimate(),
    );
    ctx.write_text(
        &pj("uncertainty.json"),
        &(serde_json::to_string_pretty(&json)? + "\n"),
    )?;

    let mut columns: Vec<(String, Vec<Option<f64>>)> = vec![
        (
            "lambda_hat".into(),
            bundle.lambda_pu.iter().map(|&v| Some(v)).collect(),
        ),
        (
            "se_full".into(),
            bundle.se_pu.iter().map(|&v| Some(v)).collect(),
        ),
    ];
    for m in &bundle.minors_pu {
        columns.push((format!("se_{}pt", m.k), m.se.clone()));
    }
    columns.push(("nts".into(), nts.nts.clone()));
    let named: Vec<(&str, Vec<Option<f64>>)> = columns
        .iter()
        .map(|(n, c)| (n.as_str(), c.clone()))
        .collect();
    ctx.write_with(&pj("se_table.csv"), |p| io::write_pixel_table(p, &named))?;

    ctx.write_with(&pj("correlation.csv"), |p| {
        io::write_square_matrix(p, &bundle.corr, "correlation")
    })?;
    ctx.write_with(&pj("fisher.csv"), |p| {
        io::write_square_matrix(p, bundle.fisher.matrix(), "information")
    })?;
    let envelope = report::fisher_envelope(&bundle.fisher, t, iterations);
    ctx.write_text(
        &pj("fisher.json"),
        &(serde_json::to_string_pretty(&envelope)? + "\n"),
    )?;

    let mut series = vec![Series::solid("full", "#111111", &bundle.se_pu)];
    for m in &bundle.minors_pu {
        series.push(Series::dashed(
            &format!("{}-point", m.k),
            minor_color(m.k),
            m.se.clone(),
        ));
    }
    if let Some(emp) = empirical_se {
        series.push(Series::dashed(
            "empirical",
            "#0066cc",
            emp.iter().map(|&v| Some(v)).collect(),
        ));
    }
    ctx.write_text(
        &pj("se_plot.svg"),
        &line_chart("standard error by pixel", "SE (per unit exposure)", &series),
    )?;

    let nts_series = Series {
        name: "noise-to-signal".into(),
        color: "#006699".into(),
        values: nts.nts.clone(),
        dashed: false,
    };
    ctx.write_text(
        &pj("nts_plot.svg"),
        &line_chart(
            "noise-to-signal by pixel",
            "sqrt(T) * SE / lambda_hat",
            &[nts_series],
        ),
    )?;
    Ok(())
}

/// Fixed color per minor window size: red for 1-point, magenta for 3-point.
pub fn minor_color(k: usize) -> &'static str {
    match k {
        1 => "#cc0000",
        3 => "#cc00cc",
        _ => "#888888",
    }
}
