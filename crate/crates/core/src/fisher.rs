//! Observed Fisher information: closed form and finite-difference oracle.
//!
//! At an EM fixed point the observed information of the incomplete-data
//! likelihood has the closed Gram form
//!
//! ```text
//! I(b1,b2) = sum_d n_d p(b1,d) p(b2,d) / g_d^2  =  (P D P^T)(b1,b2),
//! D_d = n_d / g_d^2,
//! ```
//!
//! i.e. minus the Hessian of `sum_d [n_d ln g_d - g_d]`. The module also
//! provides an independent numerical estimate of the same matrix obtained by
//! central-differencing the score around the evaluation point (optionally
//! with Richardson extrapolation), which serves as a cross-check of the
//! closed form: as the step shrinks, the two must agree to the truncation
//! order.
//!
//! The differencing is carried out in compensated (double-double) precision.
//! The information matrix spans many orders of magnitude across entries, and
//! plain working-precision cancellation in the score difference would drown
//! the smallest entries; the compensated evaluation keeps the comparison
//! meaningful at tight relative tolerances.

use crate::dd::Dd;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::system::{ChargeVector, DetectorCounts, SystemMatrix};
use crate::{Error, Result};

/// Observed Fisher information evaluated at a specific charge profile.
///
/// Symmetric by construction; positive semidefinite because it is the Gram
/// matrix of the rows of `D^{1/2} P`. The evaluation point and the counts it
/// was computed from are kept alongside the matrix so reports can state what
/// the uncertainty refers to.
#[derive(Clone, Debug)]
pub struct FisherMatrix<S> {
    matrix: Matrix<S>,
    evaluated_at: ChargeVector<S>,
    counts: DetectorCounts,
}

impl<S: Scalar> FisherMatrix<S> {
    /// Wrap a replacement matrix in the evaluation metadata of `like`
    /// (used by the run-averaged information extension).
    pub(crate) fn with_matrix(matrix: Matrix<S>, like: FisherMatrix<S>) -> Self {
        FisherMatrix {
            matrix,
            evaluated_at: like.evaluated_at,
            counts: like.counts,
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.matrix.n_rows()
    }

    #[inline]
    pub fn entry(&self, b1: usize, b2: usize) -> S {
        self.matrix[(b1, b2)]
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.matrix
    }

    pub fn evaluated_at(&self) -> &ChargeVector<S> {
        &self.evaluated_at
    }

    pub fn counts(&self) -> &DetectorCounts {
        &self.counts
    }
}

fn check_dims<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    lambda: &ChargeVector<S>,
) -> Result<()> {
    if counts.len() != system.n_detectors() {
        return Err(Error::DimensionMismatch {
            what: "detector counts vs. matrix columns",
            expected: system.n_detectors(),
            actual: counts.len(),
        });
    }
    if lambda.len() != system.n_pixels() {
        return Err(Error::DimensionMismatch {
            what: "charge vector vs. matrix rows",
            expected: system.n_pixels(),
            actual: lambda.len(),
        });
    }
    Ok(())
}

/// Per-detector information weights `D_d = n_d / g_d^2`. Detectors with zero
/// counts contribute nothing regardless of their projected mass.
pub fn diagonal_weights<S: Scalar>(counts: &DetectorCounts, g: &[S]) -> Result<Vec<S>> {
    let mut w = vec![S::zero(); g.len()];
    for (d, (&n, &gd)) in counts.as_slice().iter().zip(g).enumerate() {
        if n == 0 {
            continue;
        }
        if !(gd > S::zero()) {
            return Err(Error::DegenerateSupport {
                detector: d + 1,
                count: n,
            });
        }
        w[d] = S::from_u64(n).unwrap() / (gd * gd);
    }
    Ok(w)
}

/// Closed-form observed Fisher information at `lambda`.
pub fn fisher_information<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    lambda: &ChargeVector<S>,
) -> Result<FisherMatrix<S>> {
    check_dims(system, counts, lambda)?;
    let g = crate::system::forward_project(system, lambda)?;
    let w = diagonal_weights(counts, g.as_slice())?;
    let n = system.n_pixels();
    let mut m = Matrix::zeros(n, n);
    for b1 in 0..n {
        let row1 = system.row(b1);
        for b2 in b1..n {
            let row2 = system.row(b2);
            let mut s = S::zero();
            for ((&p1, &p2), &wd) in row1.iter().zip(row2).zip(&w) {
                if wd > S::zero() {
                    s = s + p1 * p2 * wd;
                }
            }
            m[(b1, b2)] = s;
            m[(b2, b1)] = s;
        }
    }
    Ok(FisherMatrix {
        matrix: m,
        evaluated_at: lambda.clone(),
        counts: counts.clone(),
    })
}

/// Fixed-point residual `r_b = sum_d n_d p(b,d)/g_d - 1` per pixel; zero at
/// an interior MLE. Identical (bitwise) to the score of the incomplete
/// log-likelihood.
pub fn mle_condition_residual<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    lambda: &ChargeVector<S>,
) -> Result<Vec<S>> {
    // Same computation as em::score, restated here because this module views
    // it as the fixed-point condition rather than a gradient. The summation
    // order matches exactly so the two agree bit for bit.
    crate::em::score(system, counts, lambda)
}

/// Default differencing step: `1e-4` times the smallest strictly positive
/// coordinate of `lambda`.
pub fn default_fd_epsilon<S: Scalar>(lambda: &ChargeVector<S>) -> Result<S> {
    lambda
        .min_positive()
        .map(|m| m * S::c(1e-4))
        .ok_or_else(|| {
            Error::InvalidArgument(
                "cannot choose a differencing step: charge vector has no positive entry".into(),
            )
        })
}

/// Numerical observed information by central-differencing the score.
///
/// Row `b1` is `-[S(lambda + eps e_b1) - S(lambda - eps e_b1)] / (2 eps)`;
/// with `use_richardson` the `eps` and `2 eps` stencils are combined with
/// weights 4/3 and -1/3, cancelling the leading quadratic error term. The
/// perturbation is applied at the fixed evaluation point (the projection is
/// shifted by `eps * p(b1,.)`, everything else left intact), and the result
/// is symmetrized as `(M + M^T)/2`.
pub fn fisher_fd_oracle<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    lambda: &ChargeVector<S>,
    epsilon: S,
    use_richardson: bool,
) -> Result<FisherMatrix<S>> {
    check_dims(system, counts, lambda)?;
    if !(epsilon > S::zero()) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "differencing step must be positive and finite, got {epsilon}"
        )));
    }
    let n = system.n_pixels();
    let nd = system.n_detectors();

    // Projection in compensated precision; the oracle evaluates everything
    // independently of the closed form, including g itself.
    let mut g: Vec<Dd<S>> = vec![Dd::zero(); nd];
    for b in 0..n {
        let lam = lambda.as_slice()[b];
        if lam == S::zero() {
            continue;
        }
        for (gd, &pbd) in g.iter_mut().zip(system.row(b)) {
            *gd = gd.add(Dd::prod(lam, pbd));
        }
    }
    for (d, &nc) in counts.as_slice().iter().enumerate() {
        if nc > 0 && !(g[d].hi > S::zero()) {
            return Err(Error::DegenerateSupport {
                detector: d + 1,
                count: nc,
            });
        }
    }

    let max_step = if use_richardson {
        epsilon * S::c(2.0)
    } else {
        epsilon
    };

    // Score difference across +/- step on coordinate b1; the constant -1
    // terms of the two scores cancel exactly and are omitted. Detectors with
    // zero counts contribute nothing to the score.
    let diff_row = |b1: usize, step: S| -> Vec<Dd<S>> {
        let prow = system.row(b1);
        let mut quot_diff: Vec<Dd<S>> = Vec::with_capacity(nd);
        for d in 0..nd {
            let nc = counts.as_slice()[d];
            if nc == 0 {
                quot_diff.push(Dd::zero());
                continue;
            }
            let shift = Dd::prod(step, prow[d]);
            let den_plus = g[d].add(shift);
            let den_minus = g[d].sub(shift);
            let num = Dd::from_scalar(S::from_u64(nc).unwrap());
            quot_diff.push(num.div(den_plus).sub(num.div(den_minus)));
        }
        (0..n)
            .map(|m| {
                let mut s = Dd::zero();
                for (&pmd, &qd) in system.row(m).iter().zip(&quot_diff) {
                    s = s.add(qd.mul_scalar(pmd));
                }
                s
            })
            .collect()
    };

    let mut out = Matrix::zeros(n, n);
    for b1 in 0..n {
        // The minus branch must keep every counted detector's mean positive.
        for (d, gd) in g.iter().enumerate().take(nd) {
            if counts.as_slice()[d] > 0 {
                let perturbed = gd.sub(Dd::prod(max_step, system.row(b1)[d]));
                if !(perturbed.hi > S::zero()) {
                    return Err(Error::FdStepTooLarge {
                        pixel: b1 + 1,
                        epsilon: max_step.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }

        let two_eps = Dd::from_scalar(epsilon * S::c(2.0));
        let cd1: Vec<Dd<S>> = diff_row(b1, epsilon)
            .into_iter()
            .map(|v| v.div(two_eps))
            .collect();
        let row: Vec<S> = if use_richardson {
            let four_eps = Dd::from_scalar(epsilon * S::c(4.0));
            let cd2: Vec<Dd<S>> = diff_row(b1, epsilon * S::c(2.0))
                .into_iter()
                .map(|v| v.div(four_eps))
                .collect();
            let three = Dd::from_scalar(S::c(3.0));
            cd1.iter()
                .zip(&cd2)
                .map(|(&a, &b)| a.mul_scalar(S::c(4.0)).sub(b).div(three).neg().value())
                .collect()
        } else {
            cd1.into_iter().map(|v| v.neg().value()).collect()
        };
        for (m, &v) in row.iter().enumerate() {
            out[(b1, m)] = v;
        }
    }

    // Symmetrize; the two triangles differ only by rounding noise.
    let half = S::c(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (out[(i, j)] + out[(j, i)]) * half;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }

    Ok(FisherMatrix {
        matrix: out,
        evaluated_at: lambda.clone(),
        counts: counts.clone(),
    })
}

/// Maximum entrywise variation of the information matrix across a tail of EM
/// iterates, relative to the largest entry of the final matrix. A small
/// value certifies that the information has stabilized along with the
/// iteration; the quantity is reported, not asserted against a threshold.
pub fn information_variation<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    iterates: &[Vec<S>],
) -> Result<S> {
    let last = iterates.last().ok_or_else(|| {
        Error::InvalidArgument("information variation needs at least one iterate".into())
    })?;
    let reference = fisher_information(system, counts, &ChargeVector::new(last.clone())?)?;
    let scale = reference.matrix().max_abs();
    if scale == S::zero() {
        return Ok(S::zero());
    }
    let n = reference.n_pixels();
    let mut worst = S::zero();
    for it in &iterates[..iterates.len() - 1] {
        let fi = fisher_information(system, counts, &ChargeVector::new(it.clone())?)?;
        for b1 in 0..n {
            for b2 in 0..n {
                let dv = (fi.entry(b1, b2) - reference.entry(b1, b2)).abs();
                worst = worst.max(dv);
            }
        }
    }
    Ok(worst / scale)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::em::{run_em, score, EmConfig};
    use crate::linalg::{symmetric_eigenvalues, Matrix};
    use crate::sim::sample_counts;
    use crate::system::{build_gaussian_system_matrix, forward_project, ExposureScale};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_system(n: usize) -> SystemMatrix<f64> {
        let mut p = Matrix::zeros(n, n);
        for i in 0..n {
            p[(i, i)] = 1.0;
        }
        SystemMatrix::new(p).unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, np: usize, nd: usize) -> SystemMatrix<f64> {
        let mut p = Matrix::zeros(np, nd);
        for b in 0..np {
            let mut sum = 0.0;
            for d in 0..nd {
                let v = 0.05 + rng.random::<f64>();
                p[(b, d)] = v;
                sum += v;
            }
            for d in 0..nd {
                p[(b, d)] /= sum;
            }
        }
        SystemMatrix::new(p).unwrap()
    }

    /// The seven-pixel reference setup at sigma = 1, T = 100, with counts
    /// drawn once from a fixed stream and the 200-iteration MLE.
    fn reference_mle() -> (SystemMatrix<f64>, DetectorCounts, ChargeVector<f64>) {
        let sys = build_gaussian_system_matrix::<f64>(7, 7, 1.0).unwrap();
        let truth = ChargeVector::new(vec![1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let t = ExposureScale::new(100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let counts = sample_counts(&sys, &truth, t, &mut rng).unwrap();
        let init = ChargeVector::default_init(7, &counts).unwrap();
        let run = run_em(&sys, &counts, &init, &EmConfig::new(200)).unwrap();
        (sys, counts, run.final_state.lambda)
    }

    #[test]
    fn scalar_information_is_inverse_count() {
        let sys = identity_system(1);
        for k in [1u64, 10, 1000] {
            let counts = DetectorCounts::new(vec![k]);
            let lambda = ChargeVector::new(vec![k as f64]).unwrap();
            let fi = fisher_information(&sys, &counts, &lambda).unwrap();
            let rel = (fi.entry(0, 0) * k as f64 - 1.0).abs();
            assert!(rel < 1e-12, "k={k}: I = {}", fi.entry(0, 0));
        }
    }

    #[test]
    fn scalar_fd_oracle_matches_closed_form() {
        let sys = identity_system(1);
        let counts = DetectorCounts::new(vec![10]);
        let lambda = ChargeVector::new(vec![10.0]).unwrap();
        let fd = fisher_fd_oracle(&sys, &counts, &lambda, 1e-4, false).unwrap();
        assert!((fd.entry(0, 0) - 0.1).abs() / 0.1 < 1e-8);
        let fdr = fisher_fd_oracle(&sys, &counts, &lambda, 1e-4, true).unwrap();
        assert!((fdr.entry(0, 0) - 0.1).abs() / 0.1 < 1e-12);
    }

    #[test]
    fn closed_form_is_the_fd_limit_on_the_reference_scenario() {
        let (sys, counts, mle) = reference_mle();
        let closed = fisher_information(&sys, &counts, &mle).unwrap();
        let eps = default_fd_epsilon(&mle).unwrap();
        let fd = fisher_fd_oracle(&sys, &counts, &mle, eps, true).unwrap();
        let mut worst = 0.0f64;
        for b1 in 0..7 {
            for b2 in 0..7 {
                let c = closed.entry(b1, b2);
                let rel = (fd.entry(b1, b2) - c).abs() / c.abs();
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-6, "max relative gap {worst:e}");
    }

    #[test]
    fn plain_central_difference_converges_at_second_order() {
        let (sys, counts, mle) = reference_mle();
        let closed = fisher_information(&sys, &counts, &mle).unwrap();
        let err = |eps: f64| -> f64 {
            let fd = fisher_fd_oracle(&sys, &counts, &mle, eps, false).unwrap();
            let mut worst = 0.0f64;
            for b1 in 0..7 {
                for b2 in 0..7 {
                    worst = worst.max((fd.entry(b1, b2) - closed.entry(b1, b2)).abs());
                }
            }
            worst
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        let ratio = e1 / e2;
        assert!(
            (3.3..4.7).contains(&ratio),
            "halving the step changed the error by {ratio}, expected ~4"
        );
        // Richardson at the larger step beats the plain stencil at the
        // smaller one.
        let fdr = fisher_fd_oracle(&sys, &counts, &mle, 0.02, true).unwrap();
        let mut er = 0.0f64;
        for b1 in 0..7 {
            for b2 in 0..7 {
                er = er.max((fdr.entry(b1, b2) - closed.entry(b1, b2)).abs());
            }
        }
        assert!(er < e2);
    }

    #[test]
    fn information_is_symmetric_psd_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..15 {
            let np = rng.random_range(2..=8);
            let nd = rng.random_range(2..=8);
            let sys = random_system(&mut rng, np, nd);
            let counts = DetectorCounts::new((0..nd).map(|_| rng.random_range(0..60)).collect());
            if counts.total() == 0 {
                continue;
            }
            let lambda =
                ChargeVector::new((0..np).map(|_| 0.2 + 4.0 * rng.random::<f64>()).collect())
                    .unwrap();
            let fi = fisher_information(&sys, &counts, &lambda).unwrap();
            assert_eq!(fi.matrix().max_asymmetry(), 0.0);

            // Gram identity: I = A^T A for A = D^{1/2} P^T (rows indexed by
            // detectors), reassembled here with a different loop order.
            let g = forward_project(&sys, &lambda).unwrap();
            let w = diagonal_weights(&counts, g.as_slice()).unwrap();
            let scale = fi.matrix().max_abs();
            for b1 in 0..np {
                for b2 in 0..np {
                    let mut s = 0.0;
                    for d in 0..nd {
                        let a1 = w[d].sqrt() * sys.entry(b1, d);
                        let a2 = w[d].sqrt() * sys.entry(b2, d);
                        s += a1 * a2;
                    }
                    assert!(
                        (s - fi.entry(b1, b2)).abs() <= 1e-10 * scale,
                        "Gram mismatch at ({b1},{b2})"
                    );
                }
            }

            let eig = symmetric_eigenvalues(fi.matrix(), 64);
            let max_eig = eig.last().copied().unwrap();
            assert!(
                eig[0] >= -1e-8 * max_eig.max(0.0),
                "negative eigenvalue {:e}",
                eig[0]
            );
        }
    }

    #[test]
    fn residual_equals_score_and_vanishes_at_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let np = rng.random_range(2..=7);
            let nd = rng.random_range(2..=7);
            let sys = random_system(&mut rng, np, nd);
            let counts = DetectorCounts::new((0..nd).map(|_| rng.random_range(1..40)).collect());
            let lambda =
                ChargeVector::new((0..np).map(|_| 0.3 + 3.0 * rng.random::<f64>()).collect())
                    .unwrap();
            let r = mle_condition_residual(&sys, &counts, &lambda).unwrap();
            let s = score(&sys, &counts, &lambda).unwrap();
            assert_eq!(r, s, "residual and score must agree bitwise");
        }

        let (sys, counts, _mle) = reference_mle();
        let init = ChargeVector::default_init(7, &counts).unwrap();
        let mut cfg = EmConfig::new(100_000);
        cfg.stop_tolerance = 1e-11;
        let run = run_em(&sys, &counts, &init, &cfg).unwrap();
        assert!(run.converged);
        let r = mle_condition_residual(&sys, &counts, &run.final_state.lambda).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-10));
        // Scalar sanity: lambda = 2k gives residual k/(2k) - 1 = -1/2.
        let sys1 = identity_system(1);
        let c1 = DetectorCounts::new(vec![8]);
        let l1 = ChargeVector::new(vec![16.0]).unwrap();
        let r1 = mle_condition_residual(&sys1, &c1, &l1).unwrap();
        assert_eq!(r1[0], -0.5);
    }

    #[test]
    fn row_identity_links_information_to_residual() {
        // sum_b2 I(b,b2) lambda_b2 = 1 + r_b for any lambda, and ~1 at the MLE.
        let (sys, counts, mle) = reference_mle();
        let arbitrary = ChargeVector::new(vec![0.7, 1.1, 5.0, 2.4, 3.3, 0.9, 1.6]).unwrap();
        for lambda in [&arbitrary, &mle] {
            let fi = fisher_information(&sys, &counts, lambda).unwrap();
            let r = mle_condition_residual(&sys, &counts, lambda).unwrap();
            for b in 0..7 {
                let mut s = 0.0;
                for b2 in 0..7 {
                    s += fi.entry(b, b2) * lambda.as_slice()[b2];
                }
                let want = 1.0 + r[b];
                assert!(
                    (s - want).abs() < 1e-10 * want.abs().max(1.0),
                    "pixel {b}: {s} vs {want}"
                );
            }
        }
        let fi = fisher_information(&sys, &counts, &mle).unwrap();
        for b in 0..7 {
            let mut s = 0.0;
            for b2 in 0..7 {
                s += fi.entry(b, b2) * mle.as_slice()[b2];
            }
            assert!((s - 1.0).abs() < 1e-4, "row {b} sums to {s} at the MLE");
        }
    }

    #[test]
    fn information_scales_inversely_with_charge() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sys = random_system(&mut rng, 5, 6);
        let counts: Vec<u64> = (0..6).map(|_| rng.random_range(1..30)).collect();
        let lambda: Vec<f64> = (0..5).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
        let c = 3u64;

        let fi = fisher_information(
            &sys,
            &DetectorCounts::new(counts.clone()),
            &ChargeVector::new(lambda.clone()).unwrap(),
        )
        .unwrap();
        let scaled = fisher_information(
            &sys,
            &DetectorCounts::new(counts.iter().map(|&n| n * c).collect()),
            &ChargeVector::new(lambda.iter().map(|&l| l * c as f64).collect()).unwrap(),
        )
        .unwrap();
        for b1 in 0..5 {
            for b2 in 0..5 {
                let want = fi.entry(b1, b2) / c as f64;
                let got = scaled.entry(b1, b2);
                assert!((got - want).abs() <= 1e-12 * want.abs());
            }
        }
    }

    #[test]
    fn degenerate_and_oversized_steps_are_rejected() {
        let p = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]);
        let sys = SystemMatrix::new(p).unwrap();
        let counts = DetectorCounts::new(vec![3, 4]);
        let lambda = ChargeVector::new(vec![2.0, 0.0]).unwrap();
        match fisher_information(&sys, &counts, &lambda) {
            Err(Error::DegenerateSupport { detector: 2, .. }) => {}
            other => panic!("expected degenerate support, got {other:?}"),
        }

        // A step large enough to drive g_2 = 0.5 * 0.1 negative on pixel 2.
        let lambda = ChargeVector::new(vec![2.0, 0.1]).unwrap();
        match fisher_fd_oracle(&sys, &counts, &lambda, 0.2, false) {
            Err(Error::FdStepTooLarge { pixel: 2, .. }) => {}
            other => panic!("expected step-too-large on pixel 2, got {other:?}"),
        }
        // The same call with a sane step succeeds.
        assert!(fisher_fd_oracle(&sys, &counts, &lambda, 1e-5, true).is_ok());
    }

    #[test]
    fn default_epsilon_tracks_smallest_positive_coordinate() {
        let lambda = ChargeVector::new(vec![2.0, 0.004, 5.0, 0.0]).unwrap();
        let eps: f64 = default_fd_epsilon(&lambda).unwrap();
        assert!((eps - 4.0e-7).abs() < 1e-20);
        let zero = ChargeVector::new(vec![0.0, 0.0]).unwrap();
        assert!(default_fd_epsilon(&zero).is_err());
    }

    #[test]
    fn information_variation_is_zero_for_constant_tail_and_small_near_mle() {
        let (sys, counts, mle) = reference_mle();
        let v = information_variation(
            &sys,
            &counts,
            &[mle.as_slice().to_vec(), mle.as_slice().to_vec()],
        )
        .unwrap();
        assert_eq!(v, 0.0);

        // Tail of a converged run: the information barely moves.
        let init = ChargeVector::default_init(7, &counts).unwrap();
        let mut cfg = EmConfig::new(2000);
        cfg.record_trajectory = true;
        let run = run_em(&sys, &counts, &init, &cfg).unwrap();
        let traj = run.trajectory.unwrap();
        let tail = &traj[traj.len() - 50..];
        let v = information_variation(&sys, &counts, tail).unwrap();
        assert!(v < 1e-6, "information variation over the tail: {v:e}");
    }
}
