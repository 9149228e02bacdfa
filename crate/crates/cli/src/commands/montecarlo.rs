//! `montecarlo`: repeated simulate-and-reconstruct cycles compared against
//! the closed-form uncertainty at the designated run.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use mlem_core::io;
use mlem_core::report;
use mlem_core::sim::{compare_theoretical_empirical, run_monte_carlo, ScenarioSpec};
use mlem_core::system::ExposureScale;
use serde::Serialize;

use super::{compute_theoretical, parse_minors, Ctx};
use crate::plot::{line_chart, Series};

#[derive(Debug, ClapArgs, Serialize)]
pub struct Args {
    /// Scenario description (TOML).
    #[arg(long)]
    pub scenario: PathBuf,

    /// Override the scenario's run count.
    #[arg(long)]
    pub runs: Option<usize>,

    /// Override the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Minor-inversion window sizes (odd, comma-separated).
    #[arg(long, default_value = "1,3")]
    pub minors: String,
}

pub fn run(args: &Args, ctx: &mut Ctx) -> Result<()> {
    ctx.manifest.record_input(&args.scenario);
    let raw = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut spec: ScenarioSpec =
        toml::from_str(&raw).with_context(|| format!("parsing {}", args.scenario.display()))?;

    // Flags override the scenario file; the manifest records the result.
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    ctx.manifest.config = serde_json::json!({
        "flags": args,
        "resolved_scenario": spec,
    });
    ctx.manifest.seed = Some(spec.seed);

    let minors = parse_minors(&args.minors, spec.pixels)?;
    let (scenario, runs) = spec.build()?;
    let t = spec.exposure;

    let mc = ctx.stage("monte-carlo", |_| Ok(run_monte_carlo(&scenario, runs)?))?;

    let bundle = ctx.stage("invert", |_| {
        compute_theoretical(
            &scenario.system,
            &mc.designated.counts,
            &mc.designated.mle,
            t,
            &minors,
        )
    })?;

    let comparison =
        compare_theoretical_empirical(&mc, &bundle.se_pu, &bundle.corr, ExposureScale::new(t)?)?;

    // Artifacts.
    let summary = report::monte_carlo_summary(&mc);
    ctx.write_text(
        "mc_summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    let cmp = report::comparison_summary(&comparison);
    ctx.write_text(
        "comparison.json",
        &(serde_json::to_string_pretty(&cmp)? + "\n"),
    )?;
    ctx.write_with("composite_corr.csv", |p| {
        io::write_square_matrix(p, &comparison.composite_corr, "composite-correlation")
    })?;
    ctx.write_text(
        "composite_corr.txt",
        &report::render_two_digit_matrix(&comparison.composite_corr),
    )?;
    let envelope = report::fisher_envelope(&bundle.fisher, t, spec.iterations);
    ctx.write_text(
        "fisher.json",
        &(serde_json::to_string_pretty(&envelope)? + "\n"),
    )?;

    let mut columns: Vec<(String, Vec<Option<f64>>)> = vec![
        (
            "se_theoretical".into(),
            bundle.se_pu.iter().map(|&v| Some(v)).collect(),
        ),
        (
            "se_empirical".into(),
            mc.empirical_se.iter().map(|&v| Some(v)).collect(),
        ),
    ];
    for m in &bundle.minors_pu {
        columns.push((format!("se_{}pt", m.k), m.se.clone()));
    }
    let named: Vec<(&str, Vec<Option<f64>>)> = columns
        .iter()
        .map(|(n, c)| (n.as_str(), c.clone()))
        .collect();
    ctx.write_with("se_comparison.csv", |p| io::write_pixel_table(p, &named))?;

    let mut series = vec![
        Series::solid("theoretical (full)", "#111111", &bundle.se_pu),
        Series::dashed(
            "empirical",
            "#0066cc",
            mc.empirical_se.iter().map(|&v| Some(v)).collect(),
        ),
    ];
    for m in &bundle.minors_pu {
        series.push(Series::dashed(
            &format!("{}-point", m.k),
            super::uncertainty::minor_color(m.k),
            m.se.clone(),
        ));
    }
    ctx.write_text(
        "se_plot.svg",
        &line_chart(
            "theoretical vs empirical standard error",
            "SE (per unit exposure)",
            &series,
        ),
    )?;

    // Console summary.
    println!(
        "{} runs kept ({} excluded), designated run {}",
        mc.n_runs,
        mc.excluded_runs.len(),
        mc.designated.run_index
    );
    println!(
        "max |empirical - theoretical| correlation gap: {:.4}",
        comparison.max_abs_corr_gap
    );
    println!(
        "relative SE gap: max {:.4}, mean {:.4}",
        comparison.max_rel_se_gap, comparison.mean_rel_se_gap
    );
    println!("\ncomposite correlation (empirical below, theoretical above):");
    print!(
        "{}",
        report::render_two_digit_matrix(&comparison.composite_corr)
    );
    if let Some(warning) = &comparison.scale_warning {
        eprintln!("warning: {warning}");
    }
    Ok(())
}
