//! Shared command plumbing: output-directory context, input/output helpers
//! that keep the manifest in sync, and the uncertainty bundle reused by the
//! reporting commands.

pub mod build_matrix;
pub mod montecarlo;
pub mod reconstruct;
pub mod reproduce;
pub mod simulate;
pub mod uncertainty;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mlem_core::fisher::fisher_information;
use mlem_core::io;
use mlem_core::uncertainty::{
    correlation_matrix, invert_fisher, minor_inversion_se, MinorSeEstimate,
};
use mlem_core::{ChargeVector64, CovarianceEstimate64, FisherMatrix64, Matrix64, SystemMatrix64};

use crate::manifest::RunManifest;

/// Where outputs go, plus the manifest that records the run.
pub struct Ctx<'a> {
    pub out_dir: PathBuf,
    pub manifest: &'a mut RunManifest,
}

impl Ctx<'_> {
    /// Run a pipeline stage, recording its wall-clock duration in the
    /// manifest.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = std::time::Instant::now();
        let result = f(self);
        self.manifest.timings.push(crate::manifest::StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        result
    }

    /// Resolve a relative output name, creating parent directories.
    fn prepare(&self, name: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(path)
    }

    pub fn read_matrix(&mut self, path: &Path) -> Result<SystemMatrix64> {
        self.manifest.record_input(path);
        io::read_system_matrix(path).with_context(|| format!("reading {}", path.display()))
    }

    pub fn read_counts(&mut self, path: &Path) -> Result<mlem_core::system::DetectorCounts> {
        self.manifest.record_input(path);
        io::read_counts(path).with_context(|| format!("reading {}", path.display()))
    }

    pub fn read_lambda(&mut self, path: &Path) -> Result<ChargeVector64> {
        self.manifest.record_input(path);
        io::read_charge_vector(path).with_context(|| format!("reading {}", path.display()))
    }

    /// Write a text artifact and record it.
    pub fn write_text(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.prepare(name)?;
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.record_output(&path);
        Ok(path)
    }

    /// Write an artifact through a core writer and record it.
    pub fn write_with(
        &mut self,
        name: &str,
        write: impl FnOnce(&Path) -> mlem_core::Result<()>,
    ) -> Result<PathBuf> {
        let path = self.prepare(name)?;
        write(&path).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.record_output(&path);
        Ok(path)
    }
}

/// Parse a comma-separated minor-window list such as `1,3`.
pub fn parse_minors(list: &str, n_pixels: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in list.split(',') {
        let k: usize = part
            .trim()
            .parse()
            .with_context(|| format!("--minors entry {part:?} is not an integer"))?;
        if k.is_multiple_of(2) || k > n_pixels {
            anyhow::bail!(
                "--minors entries must be odd and at most the pixel count {n_pixels}, got {k}"
            );
        }
        out.push(k);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Theoretical uncertainty at a reconstruction, with per-unit-scale views.
pub struct TheoBundle {
    pub fisher: FisherMatrix64,
    pub cov: CovarianceEstimate64,
    pub corr: Matrix64,
    /// Per-unit-exposure MLE (counts-scale estimate divided by T).
    pub lambda_pu: Vec<f64>,
    /// Per-unit-exposure full SE.
    pub se_pu: Vec<f64>,
    /// Minor-inversion SEs, per-unit, paired with their window sizes.
    pub minors_pu: Vec<MinorSeEstimate<f64>>,
}

/// Invert the information at a counts-scale MLE and rescale the uncertainty
/// to the per-unit-exposure convention used in all reports.
pub fn compute_theoretical(
    system: &SystemMatrix64,
    counts: &mlem_core::system::DetectorCounts,
    mle: &ChargeVector64,
    t: f64,
    minors: &[usize],
) -> Result<TheoBundle> {
    let fisher = fisher_information(system, counts, mle)?;
    let cov = invert_fisher(&fisher)?;
    let corr = correlation_matrix(&cov)?;
    let lambda_pu: Vec<f64> = mle.as_slice().iter().map(|&v| v / t).collect();
    let se_pu: Vec<f64> = cov.se().iter().map(|&s| s / t).collect();
    let minors_pu = minors
        .iter()
        .map(|&k| {
            minor_inversion_se(&fisher, k).map(|m| MinorSeEstimate {
                k: m.k,
                se: m.se.iter().map(|s| s.map(|v| v / t)).collect(),
            })
        })
        .collect::<mlem_core::Result<Vec<_>>>()?;
    Ok(TheoBundle {
        fisher,
        cov,
        corr,
        lambda_pu,
        se_pu,
        minors_pu,
    })
}
