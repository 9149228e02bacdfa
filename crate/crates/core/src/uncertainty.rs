//! From information to uncertainty: covariance, standard errors, minor
//! inversions, correlations and noise-to-signal ratios.
//!
//! The covariance of the MLE is estimated by the inverse of the observed
//! Fisher information. Besides the full inverse, the module offers the cheap
//! `k`-point approximations that invert only the `k x k` principal minor
//! centred on each pixel — equivalent to pretending all other pixels are
//! known, which is why they tend to understate the full standard error.

use crate::fisher::FisherMatrix;
use crate::linalg::{
    cholesky, forward_substitute, spd_inverse_from_cholesky, symmetric_eigenvalues, Matrix,
};
use crate::scalar::Scalar;
use crate::system::{ChargeVector, ExposureScale};
use crate::{Error, Result};

/// Condition-number ceiling beyond which an inversion is refused.
const CONDITION_LIMIT: f64 = 1e12;

/// How a covariance estimate was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceMethod {
    /// Full inverse of the information matrix.
    Full,
    /// Inverse of the `k x k` principal minor centred per pixel.
    MinorK(usize),
}

/// Inverse-information covariance estimate (same scale as the information
/// matrix it came from).
#[derive(Clone, Debug)]
pub struct CovarianceEstimate<S> {
    c: Matrix<S>,
    se_full: Vec<S>,
    method: CovarianceMethod,
    condition_estimate: S,
}

impl<S: Scalar> CovarianceEstimate<S> {
    pub fn matrix(&self) -> &Matrix<S> {
        &self.c
    }

    #[inline]
    pub fn entry(&self, b1: usize, b2: usize) -> S {
        self.c[(b1, b2)]
    }

    pub fn n_pixels(&self) -> usize {
        self.c.n_rows()
    }

    /// Per-pixel standard errors, the square roots of the diagonal.
    pub fn se(&self) -> &[S] {
        &self.se_full
    }

    pub fn method(&self) -> CovarianceMethod {
        self.method
    }

    /// 1-norm condition estimate `||I||_1 ||I^{-1}||_1` of the inverted matrix.
    pub fn condition_estimate(&self) -> S {
        self.condition_estimate
    }
}

/// Per-pixel standard errors from `k x k` minor inversions. Pixels whose
/// minor turned out singular carry `None`; the rest are still reported.
#[derive(Clone, Debug)]
pub struct MinorSeEstimate<S> {
    pub k: usize,
    pub se: Vec<Option<S>>,
}

impl<S: Scalar> MinorSeEstimate<S> {
    /// Pixels (0-based) whose minor could not be inverted.
    pub fn failed_pixels(&self) -> Vec<usize> {
        self.se
            .iter()
            .enumerate()
            .filter_map(|(b, v)| v.is_none().then_some(b))
            .collect()
    }
}

/// Per-observation noise-to-signal ratios; `None` where the charge is zero.
#[derive(Clone, Debug)]
pub struct NoiseToSignal<S> {
    pub nts: Vec<Option<S>>,
}

/// Invert the information matrix into a covariance estimate.
///
/// Uses a Cholesky factorization; a failed factorization or a 1-norm
/// condition estimate beyond `1e12` is reported as an error carrying the
/// estimate (a singular information matrix means the model is not
/// identifiable at this point, and silently pseudo-inverting would hide it).
pub fn invert_fisher<S: Scalar>(fi: &FisherMatrix<S>) -> Result<CovarianceEstimate<S>> {
    let a = fi.matrix();
    let Some(l) = cholesky(a) else {
        // Factorization failed: estimate how singular via the spectrum.
        let eig = symmetric_eigenvalues(a, 64);
        let max = eig.last().copied().unwrap_or(S::zero());
        let min = eig.first().copied().unwrap_or(S::zero());
        let condition = if min > S::zero() {
            (max / min).to_f64().unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        return Err(Error::IllConditioned { condition });
    };
    let c = spd_inverse_from_cholesky(&l);
    let condition_estimate = a.one_norm() * c.one_norm();
    let cond = condition_estimate.to_f64().unwrap_or(f64::INFINITY);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned { condition: cond });
    }
    let se_full = (0..c.n_rows()).map(|b| c[(b, b)].sqrt()).collect();
    Ok(CovarianceEstimate {
        c,
        se_full,
        method: CovarianceMethod::Full,
        condition_estimate,
    })
}

/// Standard errors from the inverse of the `k x k` contiguous principal
/// minor centred at each pixel.
///
/// `k` must be odd and at most the number of pixels. At the edges the window
/// is clamped to the matrix boundary, keeping its size (pixel 1 with `k = 3`
/// uses the {1,2,3} minor). `k = 1` reduces to `1/sqrt(I(b,b))` exactly;
/// `k = n_pixels` reproduces the full inversion.
pub fn minor_inversion_se<S: Scalar>(fi: &FisherMatrix<S>, k: usize) -> Result<MinorSeEstimate<S>> {
    let n = fi.n_pixels();
    if k == 0 || k > n || k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "minor window must be odd and in 1..={n}, got {k}"
        )));
    }
    let mut se = Vec::with_capacity(n);
    for b in 0..n {
        if k == 1 {
            let ibb = fi.entry(b, b);
            se.push((ibb > S::zero()).then(|| S::one() / ibb.sqrt()));
            continue;
        }
        let lo = b.saturating_sub(k / 2).min(n - k);
        let block = fi.matrix().principal_block(lo, k);
        let Some(l) = cholesky(&block) else {
            se.push(None);
            continue;
        };
        // (M^{-1})_{jj} = || L^{-1} e_j ||^2 for M = L L^T.
        let j = b - lo;
        let mut e = vec![S::zero(); k];
        e[j] = S::one();
        let y = forward_substitute(&l, &e);
        let norm2: S = y.iter().map(|&v| v * v).sum();
        se.push(Some(norm2.sqrt()));
    }
    Ok(MinorSeEstimate { k, se })
}

/// Correlation matrix `R(b1,b2) = C(b1,b2) / sqrt(C(b1,b1) C(b2,b2))` with
/// an exactly unit diagonal.
pub fn correlation_matrix<S: Scalar>(cov: &CovarianceEstimate<S>) -> Result<Matrix<S>> {
    let n = cov.n_pixels();
    for b in 0..n {
        if !(cov.entry(b, b) > S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "covariance diagonal for pixel {} is not positive; correlation undefined",
                b + 1
            )));
        }
    }
    let mut r = Matrix::zeros(n, n);
    for b1 in 0..n {
        r[(b1, b1)] = S::one();
        for b2 in (b1 + 1)..n {
            let v = cov.entry(b1, b2) / (cov.entry(b1, b1) * cov.entry(b2, b2)).sqrt();
            r[(b1, b2)] = v;
            r[(b2, b1)] = v;
        }
    }
    Ok(r)
}

/// Per-observation noise-to-signal ratios `nts_b = sqrt(T) * se_b / lambda_b`.
///
/// `se` and `lambda_hat` must share a scale (both counts-scale or both
/// per-unit-exposure); the ratio itself is then scale-free, and the
/// `sqrt(T)` factor calibrates it per unit of exposure. Pixels with zero
/// charge are reported as absent.
pub fn noise_to_signal<S: Scalar>(
    se: &[S],
    lambda_hat: &ChargeVector<S>,
    t: ExposureScale<S>,
) -> Result<NoiseToSignal<S>> {
    if se.len() != lambda_hat.len() {
        return Err(Error::DimensionMismatch {
            what: "standard errors vs. charge vector",
            expected: lambda_hat.len(),
            actual: se.len(),
        });
    }
    let sqrt_t = t.value().sqrt();
    let nts = se
        .iter()
        .zip(lambda_hat.as_slice())
        .map(|(&s, &l)| (l > S::zero()).then(|| sqrt_t * s / l))
        .collect();
    Ok(NoiseToSignal { nts })
}
