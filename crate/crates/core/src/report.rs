//! Serializable report structures and text rendering.
//!
//! Numeric results cross the file boundary as `f64` regardless of the
//! scalar type they were computed in; builders take the generic core types
//! and convert once. Scale conventions are the caller's responsibility —
//! the standard reports are at the per-unit-exposure scale.

use serde::{Deserialize, Serialize};

use crate::fisher::FisherMatrix;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::sim::{ComparisonReport, MonteCarloResult};
use crate::uncertainty::{MinorSeEstimate, NoiseToSignal};

fn vec64<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

fn rows64<S: Scalar>(m: &Matrix<S>) -> Vec<Vec<f64>> {
    (0..m.n_rows()).map(|r| vec64(m.row(r))).collect()
}

fn opt64<S: Scalar>(v: &[Option<S>]) -> Vec<Option<f64>> {
    v.iter().map(|x| x.and_then(|x| x.to_f64())).collect()
}

/// FNV-1a fingerprint of a numeric vector, used to tie an exported matrix to
/// the evaluation point it was computed at.
pub fn evaluation_point_fingerprint<S: Scalar>(values: &[S]) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for v in values {
        let bits = v.to_f64().unwrap_or(f64::NAN).to_bits();
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    format!("{h:016x}")
}

/// JSON envelope for an exported information matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FisherEnvelope {
    pub pixels: usize,
    #[serde(rename = "T")]
    pub exposure: f64,
    pub iterations: usize,
    pub evaluation_point: Vec<f64>,
    pub evaluation_point_hash: String,
    pub matrix: Vec<Vec<f64>>,
}

pub fn fisher_envelope<S: Scalar>(
    fi: &FisherMatrix<S>,
    exposure: f64,
    iterations: usize,
) -> FisherEnvelope {
    FisherEnvelope {
        pixels: fi.n_pixels(),
        exposure,
        iterations,
        evaluation_point: vec64(fi.evaluated_at().as_slice()),
        evaluation_point_hash: evaluation_point_fingerprint(fi.evaluated_at().as_slice()),
        matrix: rows64(fi.matrix()),
    }
}

/// One minor-inversion SE column of the uncertainty report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinorColumn {
    pub k: usize,
    pub se: Vec<Option<f64>>,
}

/// The standard uncertainty report (per-unit-exposure scale).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub pixels: usize,
    #[serde(rename = "T")]
    pub exposure: f64,
    pub iterations: usize,
    pub lambda_hat: Vec<f64>,
    pub se_full: Vec<f64>,
    pub se_minor: Vec<MinorColumn>,
    pub correlation: Vec<Vec<f64>>,
    pub nts: Vec<Option<f64>>,
    pub condition_estimate: f64,
}

/// Assemble the report from per-unit-scale pieces. `minors` are paired with
/// their window sizes; entries that failed inversion stay absent.
#[allow(clippy::too_many_arguments)]
pub fn uncertainty_report<S: Scalar>(
    lambda_hat: &[S],
    se_full: &[S],
    minors: &[MinorSeEstimate<S>],
    correlation: &Matrix<S>,
    nts: &NoiseToSignal<S>,
    exposure: f64,
    iterations: usize,
    condition_estimate: f64,
) -> UncertaintyReport {
    UncertaintyReport {
        pixels: lambda_hat.len(),
        exposure,
        iterations,
        lambda_hat: vec64(lambda_hat),
        se_full: vec64(se_full),
        se_minor: minors
            .iter()
            .map(|m| MinorColumn {
                k: m.k,
                se: opt64(&m.se),
            })
            .collect(),
        correlation: rows64(correlation),
        nts: opt64(&nts.nts),
        condition_estimate,
    }
}

/// Monte-Carlo experiment summary for JSON export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub n_runs: usize,
    pub excluded_runs: Vec<usize>,
    pub empirical_mean: Vec<f64>,
    pub empirical_se: Vec<f64>,
    pub empirical_corr: Vec<Vec<f64>>,
    pub empirical_cov: Vec<Vec<f64>>,
    pub designated_run_index: usize,
    pub designated_counts: Vec<u64>,
}

pub fn monte_carlo_summary<S: Scalar>(mc: &MonteCarloResult<S>) -> MonteCarloSummary {
    MonteCarloSummary {
        n_runs: mc.n_runs,
        excluded_runs: mc.excluded_runs.clone(),
        empirical_mean: vec64(&mc.empirical_mean),
        empirical_se: vec64(&mc.empirical_se),
        empirical_corr: rows64(&mc.empirical_corr),
        empirical_cov: rows64(&mc.empirical_cov),
        designated_run_index: mc.designated.run_index,
        designated_counts: mc.designated.counts.as_slice().to_vec(),
    }
}

/// Theoretical-vs-empirical comparison for JSON export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub max_abs_corr_gap: f64,
    pub mean_abs_corr_gap: f64,
    pub relative_se_gaps: Vec<f64>,
    pub max_rel_se_gap: f64,
    pub mean_rel_se_gap: f64,
    pub composite_corr: Vec<Vec<f64>>,
    pub scale_warning: Option<String>,
}

pub fn comparison_summary<S: Scalar>(r: &ComparisonReport<S>) -> ComparisonSummary {
    ComparisonSummary {
        max_abs_corr_gap: r.max_abs_corr_gap.to_f64().unwrap_or(f64::NAN),
        mean_abs_corr_gap: r.mean_abs_corr_gap.to_f64().unwrap_or(f64::NAN),
        relative_se_gaps: vec64(&r.relative_se_gaps),
        max_rel_se_gap: r.max_rel_se_gap.to_f64().unwrap_or(f64::NAN),
        mean_rel_se_gap: r.mean_rel_se_gap.to_f64().unwrap_or(f64::NAN),
        composite_corr: rows64(&r.composite_corr),
        scale_warning: r.scale_warning.clone(),
    }
}

/// Render a correlation-style matrix in the two-decimal-digit table
/// convention (one row per line, fixed-width cells).
pub fn render_two_digit_matrix<S: Scalar>(m: &Matrix<S>) -> String {
    let mut out = String::new();
    for r in 0..m.n_rows() {
        let cells: Vec<String> = m
            .row(r)
            .iter()
            .map(|&v| format!("{:>6.2}", v.to_f64().unwrap_or(f64::NAN)))
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_is_deterministic_and_sensitive() {
        let a = evaluation_point_fingerprint(&[1.0f64, 2.0, 3.0]);
        let b = evaluation_point_fingerprint(&[1.0f64, 2.0, 3.0]);
        let c = evaluation_point_fingerprint(&[1.0f64, 2.0, 3.0000000000000004]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn two_digit_rendering_matches_convention() {
        let m = Matrix::from_rows(&[vec![1.0, -0.754], vec![-0.754, 1.0]]);
        let text = render_two_digit_matrix(&m);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "  1.00  -0.75");
        assert_eq!(lines[1], " -0.75   1.00");
    }

    #[test]
    fn uncertainty_report_serializes_absent_values_as_null() {
        let report = UncertaintyReport {
            pixels: 2,
            exposure: 100.0,
            iterations: 200,
            lambda_hat: vec![1.0, 0.0],
            se_full: vec![0.4, 0.3],
            se_minor: vec![MinorColumn {
                k: 1,
                se: vec![Some(0.35), None],
            }],
            correlation: vec![vec![1.0, -0.5], vec![-0.5, 1.0]],
            nts: vec![Some(2.0), None],
            condition_estimate: 42.0,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"nts\":[2.0,null]"));
        let back: UncertaintyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.nts[1], None);
        assert_eq!(back.se_minor[0].se[1], None);
    }
}
