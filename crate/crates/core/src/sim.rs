//! Poisson data generation and the Monte-Carlo validation protocol.
//!
//! A [`Scenario`] bundles everything one replicate needs: system matrix,
//! true charge profile, exposure scale, EM configuration, per-run
//! initialization rule and a master seed. [`run_monte_carlo`] then executes
//! `n_runs` independent simulate-and-reconstruct cycles and summarizes the
//! per-unit MLE samples into empirical covariance / correlation / standard
//! errors, which are the yardstick the closed-form Fisher uncertainties are
//! validated against.
//!
//! Reproducibility contract: run `j` draws its counts from an independent
//! substream of a counter-based generator, derived from `(seed, j)` alone.
//! Results are therefore bitwise identical across repeated invocations and
//! across thread counts; run order never matters.

use crate::em::{run_em, EmConfig};
use crate::fisher::{fisher_information, FisherMatrix};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::system::{
    build_gaussian_system_matrix, forward_project, ChargeVector, DetectorCounts, ExposureScale,
    SystemMatrix,
};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// EM starting point used for each Monte-Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Uniform profile with total mass equal to the observed counts
    /// (the library default).
    Uniform,
    /// The true profile scaled to the counts scale (`T * true_lambda`) —
    /// reproduction mode, matching how the reference empirical tables were
    /// generated. Only meaningful in simulations, where the truth is known.
    TrueTumor,
}

/// A fully specified simulation experiment.
#[derive(Clone, Debug)]
pub struct Scenario<S> {
    pub system: SystemMatrix<S>,
    pub true_lambda: ChargeVector<S>,
    pub exposure: ExposureScale<S>,
    pub em: EmConfig<S>,
    pub init: InitMode,
    pub seed: u64,
}

impl<S: Scalar> Scenario<S> {
    pub fn validate(&self) -> Result<()> {
        if self.true_lambda.len() != self.system.n_pixels() {
            return Err(Error::DimensionMismatch {
                what: "true charge vector vs. matrix rows",
                expected: self.system.n_pixels(),
                actual: self.true_lambda.len(),
            });
        }
        Ok(())
    }
}

/// True charge profile of the seven-pixel validation scenarios.
pub const SEVEN_PIXEL_TRUTH: [f64; 7] = [1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0];

/// The two canonical seven-pixel setups used throughout validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferencePreset {
    /// Sharp spread: sigma = 1, T = 100.
    Narrow,
    /// Wide spread: sigma = 1.5, T = 1000 (harder, slower-mixing problem).
    Wide,
}

impl ReferencePreset {
    pub fn sigma(self) -> f64 {
        match self {
            ReferencePreset::Narrow => 1.0,
            ReferencePreset::Wide => 1.5,
        }
    }

    pub fn exposure(self) -> f64 {
        match self {
            ReferencePreset::Narrow => 100.0,
            ReferencePreset::Wide => 1000.0,
        }
    }

    /// EM budget per run. 200 iterations bring the narrow scenario to a
    /// fixed-point residual where the information matrix has stabilized; the
    /// wide spread mixes much more slowly (its residual is still ~1e-3 after
    /// 200 steps) and needs around 3000 iterations before the empirical and
    /// theoretical uncertainties can be compared on equal footing.
    pub fn iterations(self) -> usize {
        match self {
            ReferencePreset::Narrow => 200,
            ReferencePreset::Wide => 3000,
        }
    }

    pub fn scenario<S: Scalar>(self, init: InitMode, seed: u64) -> Result<Scenario<S>> {
        let system = build_gaussian_system_matrix(7, 7, S::c(self.sigma()))?;
        let true_lambda = ChargeVector::new(SEVEN_PIXEL_TRUTH.iter().map(|&v| S::c(v)).collect())?;
        let exposure = ExposureScale::new(S::c(self.exposure()))?;
        Ok(Scenario {
            system,
            true_lambda,
            exposure,
            em: EmConfig::new(self.iterations()),
            init,
            seed,
        })
    }
}

/// Draw one detector-count vector: `n_d ~ Poisson(T * g_d)` independently.
///
/// Sampling is always performed in `f64`, so a given generator state yields
/// the same counts regardless of the scalar type of the scenario.
pub fn sample_counts<S: Scalar, R: Rng + ?Sized>(
    system: &SystemMatrix<S>,
    true_lambda: &ChargeVector<S>,
    exposure: ExposureScale<S>,
    rng: &mut R,
) -> Result<DetectorCounts> {
    let g = forward_project(system, true_lambda)?;
    let t = exposure.value();
    let mut counts = Vec::with_capacity(g.len());
    for &gd in g.as_slice() {
        let mean = (t * gd).to_f64().unwrap_or(f64::NAN);
        if mean == 0.0 {
            counts.push(0);
            continue;
        }
        let pois = Poisson::new(mean)
            .map_err(|e| Error::InvalidArgument(format!("invalid Poisson mean {mean}: {e}")))?;
        let draw: f64 = pois.sample(rng);
        counts.push(draw as u64);
    }
    Ok(DetectorCounts::new(counts))
}

/// Data of the run whose counts feed the theoretical information matrix.
#[derive(Clone, Debug)]
pub struct DesignatedRun<S> {
    /// Index of the run within the experiment (the first successful run,
    /// i.e. 0 unless runs were excluded).
    pub run_index: usize,
    pub counts: DetectorCounts,
    /// Counts-scale MLE of that run.
    pub mle: ChargeVector<S>,
}

/// Summary of a Monte-Carlo experiment. All sample statistics are at the
/// per-unit-exposure scale (each run stores `lambda_hat / T`).
#[derive(Clone, Debug)]
pub struct MonteCarloResult<S> {
    /// Number of successful runs (rows of `mle_samples`).
    pub n_runs: usize,
    /// Indices of runs excluded for degenerate support (empty in any
    /// well-posed scenario).
    pub excluded_runs: Vec<usize>,
    /// `n_runs x n_pixels` matrix of per-unit MLE samples.
    pub mle_samples: Matrix<S>,
    pub empirical_mean: Vec<S>,
    /// Sample covariance (denominator `n_runs - 1`).
    pub empirical_cov: Matrix<S>,
    pub empirical_corr: Matrix<S>,
    /// Per-pixel sample standard deviations.
    pub empirical_se: Vec<S>,
    pub designated: DesignatedRun<S>,
}

fn run_once<S: Scalar>(
    sc: &Scenario<S>,
    run_index: usize,
) -> Result<(DetectorCounts, ChargeVector<S>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(run_index as u64);
    let counts = sample_counts(&sc.system, &sc.true_lambda, sc.exposure, &mut rng)?;
    let init = match sc.init {
        InitMode::Uniform => ChargeVector::default_init(sc.system.n_pixels(), &counts)?,
        InitMode::TrueTumor => sc.true_lambda.scaled(sc.exposure.value()),
    };
    let run = run_em(&sc.system, &counts, &init, &sc.em)?;
    Ok((counts, run.final_state.lambda))
}

/// Execute `n_runs` independent simulate-and-reconstruct cycles.
///
/// Runs execute in parallel; each owns its RNG substream, and results are
/// gathered by run index, so the outcome is deterministic for a fixed seed.
pub fn run_monte_carlo<S: Scalar>(sc: &Scenario<S>, n_runs: usize) -> Result<MonteCarloResult<S>> {
    sc.validate()?;
    if n_runs < 2 {
        return Err(Error::InvalidArgument(format!(
            "a Monte-Carlo experiment needs at least 2 runs, got {n_runs}"
        )));
    }

    let outcomes: Vec<Result<(DetectorCounts, ChargeVector<S>)>> = (0..n_runs)
        .into_par_iter()
        .map(|j| run_once(sc, j))
        .collect();

    let mut excluded_runs = Vec::new();
    let mut kept: Vec<(usize, DetectorCounts, ChargeVector<S>)> = Vec::with_capacity(n_runs);
    for (j, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((counts, mle)) => kept.push((j, counts, mle)),
            Err(Error::DegenerateSupport { .. }) => excluded_runs.push(j),
            Err(e) => return Err(e),
        }
    }
    if kept.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {} of {n_runs} runs completed; cannot form sample statistics",
            kept.len()
        )));
    }

    let b = sc.system.n_pixels();
    let t = sc.exposure.value();
    let mut samples = Matrix::zeros(kept.len(), b);
    for (row, (_, _, mle)) in kept.iter().enumerate() {
        for (col, &v) in mle.as_slice().iter().enumerate() {
            samples[(row, col)] = v / t;
        }
    }
    let summary = summarize_samples(&samples);

    let (run_index, counts, mle) = kept.swap_remove(0);
    Ok(MonteCarloResult {
        n_runs: samples.n_rows(),
        excluded_runs,
        mle_samples: samples,
        empirical_mean: summary.mean,
        empirical_cov: summary.cov,
        empirical_corr: summary.corr,
        empirical_se: summary.se,
        designated: DesignatedRun {
            run_index,
            counts,
            mle,
        },
    })
}

/// Sample moments of a runs-by-pixels matrix.
pub struct SampleSummary<S> {
    pub mean: Vec<S>,
    pub cov: Matrix<S>,
    pub corr: Matrix<S>,
    pub se: Vec<S>,
}

/// Sample mean / covariance (n-1 denominator) / correlation / SD of the rows
/// of `samples`. Zero-variance columns get zero correlation off the diagonal
/// (the sample correlation is undefined there) and one on it.
pub fn summarize_samples<S: Scalar>(samples: &Matrix<S>) -> SampleSummary<S> {
    let n = samples.n_rows();
    let b = samples.n_cols();
    assert!(n >= 2, "sample statistics need at least two rows");
    let nf = S::from_usize(n).unwrap();
    let mut mean = vec![S::zero(); b];
    for row in 0..n {
        for (m, &v) in mean.iter_mut().zip(samples.row(row)) {
            *m = *m + v;
        }
    }
    for m in &mut mean {
        *m = *m / nf;
    }

    let denom = S::from_usize(n - 1).unwrap();
    let mut cov = Matrix::zeros(b, b);
    for b1 in 0..b {
        for b2 in b1..b {
            let mut s = S::zero();
            for row in 0..n {
                let d1 = samples[(row, b1)] - mean[b1];
                let d2 = samples[(row, b2)] - mean[b2];
                s = s + d1 * d2;
            }
            let v = s / denom;
            cov[(b1, b2)] = v;
            cov[(b2, b1)] = v;
        }
    }

    let se: Vec<S> = (0..b).map(|i| cov[(i, i)].max(S::zero()).sqrt()).collect();
    let mut corr = Matrix::zeros(b, b);
    for b1 in 0..b {
        corr[(b1, b1)] = S::one();
        for b2 in (b1 + 1)..b {
            let denom = se[b1] * se[b2];
            let v = if denom > S::zero() {
                cov[(b1, b2)] / denom
            } else {
                S::zero()
            };
            corr[(b1, b2)] = v;
            corr[(b2, b1)] = v;
        }
    }
    SampleSummary {
        mean,
        cov,
        corr,
        se,
    }
}

/// Theoretical information matrix averaged over every run of the experiment
/// (each run's information evaluated at its own MLE, entrywise mean).
///
/// This is a stability-study extension; the standard protocol uses the
/// single designated run's information.
pub fn averaged_information<S: Scalar>(sc: &Scenario<S>, n_runs: usize) -> Result<FisherMatrix<S>> {
    sc.validate()?;
    if n_runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let partials: Vec<Result<Matrix<S>>> = (0..n_runs)
        .into_par_iter()
        .map(|j| {
            let (counts, mle) = run_once(sc, j)?;
            Ok(fisher_information(&sc.system, &counts, &mle)?
                .matrix()
                .clone())
        })
        .collect();
    let b = sc.system.n_pixels();
    let mut acc = Matrix::zeros(b, b);
    let mut used = 0usize;
    for p in partials {
        match p {
            Ok(m) => {
                for i in 0..b {
                    for j in 0..b {
                        acc[(i, j)] = acc[(i, j)] + m[(i, j)];
                    }
                }
                used += 1;
            }
            Err(Error::DegenerateSupport { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "every run hit degenerate support; no information to average".into(),
        ));
    }
    let nf = S::from_usize(used).unwrap();
    for i in 0..b {
        for j in 0..b {
            acc[(i, j)] = acc[(i, j)] / nf;
        }
    }
    // Re-anchor the averaged matrix on the designated run's evaluation point
    // for reporting purposes.
    let (counts, mle) = run_once(sc, 0)?;
    let anchor = fisher_information(&sc.system, &counts, &mle)?;
    Ok(FisherMatrix::with_matrix(acc, anchor))
}

/// Entrywise comparison of empirical and theoretical uncertainty.
#[derive(Clone, Debug)]
pub struct ComparisonReport<S> {
    pub max_abs_corr_gap: S,
    pub mean_abs_corr_gap: S,
    /// Per-pixel relative SE gaps `|emp - theo| / theo`.
    pub relative_se_gaps: Vec<S>,
    pub max_rel_se_gap: S,
    pub mean_rel_se_gap: S,
    /// Composite correlation matrix: empirical below the diagonal,
    /// theoretical above, ones on the diagonal.
    pub composite_corr: Matrix<S>,
    /// Set when the SE vectors differ by a near-constant factor close to a
    /// power of the exposure scale — the signature of comparing a
    /// counts-scale quantity against a per-unit one.
    pub scale_warning: Option<String>,
}

/// Compare Monte-Carlo sample statistics against theoretical (inverse
/// information) uncertainty. `theoretical_se` must be at the per-unit scale,
/// matching the sample side.
pub fn compare_theoretical_empirical<S: Scalar>(
    mc: &MonteCarloResult<S>,
    theoretical_se: &[S],
    theoretical_corr: &Matrix<S>,
    exposure: ExposureScale<S>,
) -> Result<ComparisonReport<S>> {
    let b = mc.mle_samples.n_cols();
    if theoretical_se.len() != b {
        return Err(Error::DimensionMismatch {
            what: "theoretical SE vs. sample pixels",
            expected: b,
            actual: theoretical_se.len(),
        });
    }
    if theoretical_corr.n_rows() != b || theoretical_corr.n_cols() != b {
        return Err(Error::DimensionMismatch {
            what: "theoretical correlation vs. sample pixels",
            expected: b,
            actual: theoretical_corr.n_rows(),
        });
    }

    let mut max_corr = S::zero();
    let mut sum_corr = S::zero();
    let mut n_off = 0usize;
    let mut composite = Matrix::zeros(b, b);
    for b1 in 0..b {
        composite[(b1, b1)] = S::one();
        for b2 in 0..b {
            if b1 == b2 {
                continue;
            }
            let gap = (mc.empirical_corr[(b1, b2)] - theoretical_corr[(b1, b2)]).abs();
            max_corr = max_corr.max(gap);
            sum_corr = sum_corr + gap;
            n_off += 1;
            composite[(b1, b2)] = if b1 < b2 {
                theoretical_corr[(b1, b2)]
            } else {
                mc.empirical_corr[(b1, b2)]
            };
        }
    }
    let mean_corr = if n_off > 0 {
        sum_corr / S::from_usize(n_off).unwrap()
    } else {
        S::zero()
    };

    let mut se_gaps = Vec::with_capacity(b);
    let mut max_se = S::zero();
    let mut sum_se = S::zero();
    for (&emp, &theo) in mc.empirical_se.iter().zip(theoretical_se) {
        let gap = if theo > S::zero() {
            (emp - theo).abs() / theo
        } else {
            S::zero()
        };
        se_gaps.push(gap);
        max_se = max_se.max(gap);
        sum_se = sum_se + gap;
    }
    let mean_se = sum_se / S::from_usize(b.max(1)).unwrap();

    let scale_warning = detect_scale_mismatch(
        &mc.empirical_se,
        theoretical_se,
        exposure.value().to_f64().unwrap_or(1.0),
    );

    Ok(ComparisonReport {
        max_abs_corr_gap: max_corr,
        mean_abs_corr_gap: mean_corr,
        relative_se_gaps: se_gaps,
        max_rel_se_gap: max_se,
        mean_rel_se_gap: mean_se,
        composite_corr: composite,
        scale_warning,
    })
}

/// If `theo_se / emp_se` is nearly constant and that constant sits near
/// `T`, `sqrt(T)`, `1/T` or `1/sqrt(T)`, the two sides are almost certainly
/// on different scales; return a human-readable warning.
fn detect_scale_mismatch<S: Scalar>(emp: &[S], theo: &[S], t: f64) -> Option<String> {
    if t == 1.0 {
        return None;
    }
    let ratios: Vec<f64> = emp
        .iter()
        .zip(theo)
        .filter_map(|(&e, &th)| {
            let (e, th) = (e.to_f64()?, th.to_f64()?);
            (e > 0.0 && th > 0.0).then(|| th / e)
        })
        .collect();
    if ratios.len() < 2 {
        return None;
    }
    let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let near_constant = ratios.iter().all(|r| (r / mean - 1.0).abs() < 0.2);
    if !near_constant {
        return None;
    }
    for (factor, name) in [
        (t, "T"),
        (t.sqrt(), "sqrt(T)"),
        (1.0 / t, "1/T"),
        (1.0 / t.sqrt(), "1/sqrt(T)"),
    ] {
        if (mean / factor - 1.0).abs() < 0.2 {
            return Some(format!(
                "theoretical and empirical SE differ by a near-constant factor {mean:.4} ~ {name}; \
                 check that both sides use the per-unit-exposure scale"
            ));
        }
    }
    None
}

/// Declarative scenario description as read from a scenario file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub pixels: usize,
    pub detectors: usize,
    pub sigma: f64,
    pub true_lambda: Vec<f64>,
    #[serde(rename = "T")]
    pub exposure: f64,
    pub iterations: usize,
    pub runs: usize,
    pub seed: u64,
    pub init_mode: InitMode,
}

impl ScenarioSpec {
    /// Materialize the spec into a runnable scenario (plus its run count).
    pub fn build(&self) -> Result<(Scenario<f64>, usize)> {
        let system = build_gaussian_system_matrix(self.pixels, self.detectors, self.sigma)?;
        let true_lambda = ChargeVector::new(self.true_lambda.clone())?;
        let exposure = ExposureScale::new(self.exposure)?;
        let sc = Scenario {
            system,
            true_lambda,
            exposure,
            em: EmConfig::new(self.iterations),
            init: self.init_mode,
            seed: self.seed,
        };
        sc.validate()?;
        Ok((sc, self.runs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::{correlation_matrix, invert_fisher};

    fn scalar_scenario(k: f64, t: f64, iterations: usize, seed: u64) -> Scenario<f64> {
        let system = SystemMatrix::new(Matrix::from_rows(&[vec![1.0]])).unwrap();
        Scenario {
            system,
            true_lambda: ChargeVector::new(vec![k]).unwrap(),
            exposure: ExposureScale::new(t).unwrap(),
            em: EmConfig::new(iterations),
            init: InitMode::Uniform,
            seed,
        }
    }

    #[test]
    fn poisson_sampler_zero_mean_and_moments() {
        let system = SystemMatrix::new(Matrix::from_rows(&[vec![1.0, 0.0]])).unwrap();
        let truth = ChargeVector::new(vec![3.0]).unwrap();
        let t = ExposureScale::new(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        // Detector 2 has zero projected mass: its count is always zero.
        // Detector 1 has mean 6; check LLN mean and variance over draws.
        let n = 20_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let c = sample_counts(&system, &truth, t, &mut rng).unwrap();
            assert_eq!(c.as_slice()[1], 0);
            let v = c.as_slice()[0] as f64;
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // 4-sigma tolerances: sd(mean) = sqrt(6/n), sd(var) ~ sqrt(2*36+6)/sqrt(n).
        assert!((mean - 6.0).abs() < 4.0 * (6.0f64 / n as f64).sqrt());
        assert!((var - 6.0).abs() < 4.0 * (78.0f64 / n as f64).sqrt());
    }

    #[test]
    fn scalar_scenario_empirical_se_matches_exact_poisson() {
        // Per-unit MLE is n/T with n ~ Poisson(kT): sd = sqrt(kT)/T.
        let k = 50.0;
        let t = 4.0;
        let n_runs = 4000;
        let sc = scalar_scenario(k, t, 1, 7);
        let mc = run_monte_carlo(&sc, n_runs).unwrap();
        let exact = (k * t).sqrt() / t;
        let rel_tol = 4.0 / (2.0 * n_runs as f64).sqrt();
        let got = mc.empirical_se[0];
        assert!(
            (got / exact - 1.0).abs() < rel_tol,
            "empirical sd {got}, exact {exact}, rel tol {rel_tol}"
        );
        // Sample mean is near k on the per-unit scale.
        assert!((mc.empirical_mean[0] / k - 1.0).abs() < rel_tol);
        assert!(mc.excluded_runs.is_empty());
        assert_eq!(mc.designated.run_index, 0);
    }

    #[test]
    fn monte_carlo_is_bitwise_deterministic_across_thread_counts() {
        let sc = ReferencePreset::Narrow
            .scenario::<f64>(InitMode::Uniform, 11)
            .unwrap();
        let sc = Scenario {
            em: EmConfig::new(50),
            ..sc
        };
        let a = run_monte_carlo(&sc, 64).unwrap();
        let b = run_monte_carlo(&sc, 64).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_monte_carlo(&sc, 64).unwrap());
        assert_eq!(a.mle_samples.as_slice(), b.mle_samples.as_slice());
        assert_eq!(a.empirical_cov.as_slice(), b.empirical_cov.as_slice());
        assert_eq!(a.mle_samples.as_slice(), single.mle_samples.as_slice());
        assert_eq!(a.empirical_cov.as_slice(), single.empirical_cov.as_slice());
        assert_eq!(
            a.designated.counts.as_slice(),
            single.designated.counts.as_slice()
        );
    }

    #[test]
    fn identical_samples_give_zero_covariance() {
        let row = vec![1.5, 2.5, 0.5];
        let samples = Matrix::from_rows(&[row.clone(), row]);
        let s = summarize_samples(&samples);
        assert!(s.cov.as_slice().iter().all(|&v| v == 0.0));
        assert!(s.se.iter().all(|&v| v == 0.0));
        // Correlation degenerates to zero off-diagonal, one on the diagonal.
        assert_eq!(s.corr[(0, 0)], 1.0);
        assert_eq!(s.corr[(0, 1)], 0.0);
    }

    #[test]
    fn covariance_is_invariant_under_run_permutation() {
        let sc = scalar_scenario(20.0, 2.0, 3, 3);
        let mc = run_monte_carlo(&sc, 50).unwrap();
        let n = mc.mle_samples.n_rows();
        let reversed = Matrix::from_rows(
            &(0..n)
                .rev()
                .map(|r| mc.mle_samples.row(r).to_vec())
                .collect::<Vec<_>>(),
        );
        let s = summarize_samples(&reversed);
        for (a, b) in s.cov.as_slice().iter().zip(mc.empirical_cov.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn comparison_gap_shrinks_with_more_runs() {
        let sc = ReferencePreset::Narrow
            .scenario::<f64>(InitMode::TrueTumor, 5)
            .unwrap();
        let gap = |n_runs: usize| -> f64 {
            let mc = run_monte_carlo(&sc, n_runs).unwrap();
            let fi =
                fisher_information(&sc.system, &mc.designated.counts, &mc.designated.mle).unwrap();
            let cov = invert_fisher(&fi).unwrap();
            let corr = correlation_matrix(&cov).unwrap();
            let t = sc.exposure.value();
            let se_pu: Vec<f64> = cov.se().iter().map(|s| s / t).collect();
            let report = compare_theoretical_empirical(&mc, &se_pu, &corr, sc.exposure).unwrap();
            assert!(report.scale_warning.is_none());
            report.max_abs_corr_gap
        };
        let coarse = gap(150);
        let fine = gap(6000);
        assert!(
            fine < coarse,
            "correlation gap did not shrink: {coarse} -> {fine}"
        );
    }

    #[test]
    fn comparison_identical_inputs_give_zero_gaps() {
        let sc = scalar_scenario(30.0, 2.0, 2, 9);
        let mc = run_monte_carlo(&sc, 100).unwrap();
        let corr = mc.empirical_corr.clone();
        let se = mc.empirical_se.clone();
        let report = compare_theoretical_empirical(&mc, &se, &corr, sc.exposure).unwrap();
        assert_eq!(report.max_abs_corr_gap, 0.0);
        assert_eq!(report.max_rel_se_gap, 0.0);
    }

    #[test]
    fn scale_mismatch_is_detected() {
        let sc = ReferencePreset::Narrow
            .scenario::<f64>(InitMode::Uniform, 21)
            .unwrap();
        let sc = Scenario {
            em: EmConfig::new(100),
            ..sc
        };
        let mc = run_monte_carlo(&sc, 200).unwrap();
        let fi = fisher_information(&sc.system, &mc.designated.counts, &mc.designated.mle).unwrap();
        let cov = invert_fisher(&fi).unwrap();
        let corr = correlation_matrix(&cov).unwrap();
        // Counts-scale SE against per-unit samples: off by exactly T.
        let report = compare_theoretical_empirical(&mc, cov.se(), &corr, sc.exposure).unwrap();
        let warning = report.scale_warning.expect("expected a scale warning");
        assert!(warning.contains("T"), "warning: {warning}");
    }

    #[test]
    fn averaged_information_is_close_to_designated_run_information() {
        let sc = ReferencePreset::Narrow
            .scenario::<f64>(InitMode::TrueTumor, 13)
            .unwrap();
        let sc = Scenario {
            em: EmConfig::new(200),
            ..sc
        };
        let mc = run_monte_carlo(&sc, 40).unwrap();
        let single =
            fisher_information(&sc.system, &mc.designated.counts, &mc.designated.mle).unwrap();
        let avg = averaged_information(&sc, 40).unwrap();
        let scale = single.matrix().max_abs();
        for b1 in 0..7 {
            for b2 in 0..7 {
                let gap = (avg.entry(b1, b2) - single.entry(b1, b2)).abs();
                assert!(
                    gap <= 0.35 * scale,
                    "averaged information far from single-run value at ({b1},{b2})"
                );
            }
        }
    }

    #[test]
    fn scenario_spec_round_trips_and_builds() {
        let spec = ScenarioSpec {
            pixels: 7,
            detectors: 7,
            sigma: 1.0,
            true_lambda: SEVEN_PIXEL_TRUTH.to_vec(),
            exposure: 100.0,
            iterations: 200,
            runs: 100,
            seed: 42,
            init_mode: InitMode::TrueTumor,
        };
        let (sc, runs) = spec.build().unwrap();
        assert_eq!(runs, 100);
        assert_eq!(sc.system.n_pixels(), 7);
        assert_eq!(sc.em.max_iterations, 200);
        assert_eq!(sc.init, InitMode::TrueTumor);

        let bad = ScenarioSpec {
            true_lambda: vec![1.0, 2.0],
            ..spec
        };
        assert!(bad.build().is_err());
    }

    #[test]
    fn run_count_is_validated() {
        let sc = scalar_scenario(5.0, 1.0, 1, 1);
        assert!(run_monte_carlo(&sc, 1).is_err());
        assert!(run_monte_carlo(&sc, 2).is_ok());
    }
}
