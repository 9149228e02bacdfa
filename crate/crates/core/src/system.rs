//! Model types: system matrix, charge vector, detector counts, projection.
//!
//! The emission model is one-dimensional. `B` pixels hold a nonnegative
//! charge profile `lambda`; a row-stochastic system matrix `P` (rows =
//! pixels, columns = detectors) spreads each pixel's charge over the
//! detectors; detector `d` then observes a Poisson count with mean
//! `T * g_d` where `g = P^T lambda` is the projection and `T` the exposure
//! scale.
//!
//! Indices are 0-based everywhere in code. Printed diagnostics and file
//! headers use 1-based pixel/detector numbers, matching the usual physics
//! labelling.

use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Row-stochastic pixel-to-detector spread matrix.
///
/// Construction validates the stochasticity invariants; once built, a
/// `SystemMatrix` is guaranteed to have entries in `[0, 1]`, rows summing to
/// one within [`Scalar::row_sum_tolerance`], and no all-zero row.
#[derive(Clone, Debug)]
pub struct SystemMatrix<S> {
    p: Matrix<S>,
}

impl<S: Scalar> SystemMatrix<S> {
    /// Wrap a validated matrix. Fails with a summary of every violated
    /// invariant if `p` is not row-stochastic.
    pub fn new(p: Matrix<S>) -> Result<Self> {
        let report = validate_rows(&p);
        if report.passes() {
            Ok(SystemMatrix { p })
        } else {
            Err(Error::InvalidArgument(format!(
                "system matrix is not row-stochastic: {report}"
            )))
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.p.n_rows()
    }

    pub fn n_detectors(&self) -> usize {
        self.p.n_cols()
    }

    /// Spread row of pixel `b` (0-based).
    pub fn row(&self, b: usize) -> &[S] {
        self.p.row(b)
    }

    #[inline]
    pub fn entry(&self, b: usize, d: usize) -> S {
        self.p[(b, d)]
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.p
    }
}

/// Nonnegative charge profile over pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeVector<S>(Vec<S>);

impl<S: Scalar> ChargeVector<S> {
    /// Validates that the profile is non-empty, finite and nonnegative.
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("charge vector is empty".into()));
        }
        for (b, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < S::zero() {
                return Err(Error::InvalidArgument(format!(
                    "charge vector entry for pixel {} is {v}, must be finite and >= 0",
                    b + 1
                )));
            }
        }
        Ok(ChargeVector(values))
    }

    /// Uniform strictly-positive profile with the given total mass.
    pub fn uniform(n_pixels: usize, total_mass: S) -> Result<Self> {
        if n_pixels == 0 {
            return Err(Error::InvalidArgument("need at least one pixel".into()));
        }
        if !(total_mass > S::zero()) || !total_mass.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uniform init needs a positive finite total mass, got {total_mass}"
            )));
        }
        let v = total_mass / S::from_usize(n_pixels).unwrap();
        Ok(ChargeVector(vec![v; n_pixels]))
    }

    /// Default EM starting point: uniform with total mass equal to the total
    /// observed counts. The EM iteration conserves total mass, so this puts
    /// the iterates on the correct scale from step one. With an all-zero
    /// count vector the mass is taken as one (any strictly positive start
    /// reaches the all-zero MLE in a single step).
    pub fn default_init(n_pixels: usize, counts: &DetectorCounts) -> Result<Self> {
        let total = counts.total();
        let mass = if total == 0 {
            S::one()
        } else {
            S::from_u64(total).unwrap()
        };
        Self::uniform(n_pixels, mass)
    }

    pub(crate) fn from_raw(values: Vec<S>) -> Self {
        ChargeVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<S> {
        self.0
    }

    pub fn total(&self) -> S {
        self.0.iter().copied().sum()
    }

    /// Smallest strictly positive entry, if any.
    pub fn min_positive(&self) -> Option<S> {
        self.0
            .iter()
            .copied()
            .filter(|&v| v > S::zero())
            .fold(None, |m, v| Some(m.map_or(v, |m: S| m.min(v))))
    }

    /// Rescale every entry by `factor` (used to switch between the counts
    /// scale and the per-unit-exposure scale).
    pub fn scaled(&self, factor: S) -> ChargeVector<S> {
        ChargeVector(self.0.iter().map(|&v| v * factor).collect())
    }
}

/// Observed detector counts. Nonnegativity and integrality are carried by
/// the type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectorCounts(Vec<u64>);

impl DetectorCounts {
    pub fn new(counts: Vec<u64>) -> Self {
        DetectorCounts(counts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl From<Vec<u64>> for DetectorCounts {
    fn from(v: Vec<u64>) -> Self {
        DetectorCounts(v)
    }
}

/// Projected detector means `g = P^T lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection<S>(Vec<S>);

impl<S: Scalar> Projection<S> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<S> {
        self.0
    }

    pub fn total(&self) -> S {
        self.0.iter().copied().sum()
    }
}

/// Exposure scale `T` (counts per unit of charge), strictly positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExposureScale<S>(S);

impl<S: Scalar> ExposureScale<S> {
    pub fn new(t: S) -> Result<Self> {
        if t > S::zero() && t.is_finite() {
            Ok(ExposureScale(t))
        } else {
            Err(Error::InvalidArgument(format!(
                "exposure scale must be positive and finite, got {t}"
            )))
        }
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// Gaussian spread system matrix on a `1..=n_pixels` grid of unit-width
/// pixels observed by `n_detectors` unit-width detector bins.
///
/// The charge in pixel `m` (1-based) spreads as a normal distribution
/// centred on the pixel with standard deviation `sigma / sqrt(m)`, i.e.
/// deeper pixels are observed more sharply. Detector `j` (1-based) collects
/// the mass between `j - 1/2` and `j + 1/2` relative to the pixel centre,
/// except that the first and last detectors absorb the corresponding
/// Gaussian tails so that every row sums to exactly one in exact arithmetic.
pub fn build_gaussian_system_matrix<S: Scalar>(
    n_pixels: usize,
    n_detectors: usize,
    sigma: S,
) -> Result<SystemMatrix<S>> {
    if n_pixels == 0 || n_detectors == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions must be positive, got {n_pixels} pixels x {n_detectors} detectors"
        )));
    }
    if !(sigma > S::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spread sigma must be positive and finite, got {sigma}"
        )));
    }
    let half = S::c(0.5);
    let mut p = Matrix::zeros(n_pixels, n_detectors);
    for b in 0..n_pixels {
        let m = S::from_usize(b + 1).unwrap();
        let std = sigma / m.sqrt();
        // Breakpoints of the detector partition in CDF space; the two tail
        // absorptions are encoded by pinning the ends at 0 and 1.
        let mut c_prev = S::zero();
        let row = p.row_mut(b);
        for (d, slot) in row.iter_mut().enumerate() {
            let c_next = if d + 1 == n_detectors {
                S::one()
            } else {
                let j = S::from_usize(d + 1).unwrap();
                ((j - m + half) / std).normal_cdf()
            };
            // Phi is monotone, so the difference is nonnegative up to
            // rounding; clamp the rounding case.
            *slot = (c_next - c_prev).max(S::zero());
            c_prev = c_next;
        }
    }
    SystemMatrix::new(p)
}

/// Forward projection `g = P^T lambda`.
pub fn forward_project<S: Scalar>(
    system: &SystemMatrix<S>,
    lambda: &ChargeVector<S>,
) -> Result<Projection<S>> {
    if lambda.len() != system.n_pixels() {
        return Err(Error::DimensionMismatch {
            what: "forward projection (charge vector vs. matrix rows)",
            expected: system.n_pixels(),
            actual: lambda.len(),
        });
    }
    let mut g = vec![S::zero(); system.n_detectors()];
    for (b, &lam) in lambda.as_slice().iter().enumerate() {
        if lam == S::zero() {
            continue;
        }
        for (gd, &pbd) in g.iter_mut().zip(system.row(b)) {
            *gd = *gd + lam * pbd;
        }
    }
    Ok(Projection(g))
}

/// Detailed row-stochasticity diagnostics for a candidate system matrix.
#[derive(Clone, Debug)]
pub struct ValidationReport<S> {
    /// Largest `|row sum - 1|` over all rows.
    pub max_row_sum_deviation: S,
    /// Rows (0-based) whose sum misses one by more than the tolerance.
    pub bad_row_sums: Vec<(usize, S)>,
    /// Entries outside `[0, 1]` as `(row, col, value)`.
    pub out_of_range: Vec<(usize, usize, S)>,
    /// Non-finite entries as `(row, col)`.
    pub non_finite: Vec<(usize, usize)>,
    /// Rows with no positive entry.
    pub zero_rows: Vec<usize>,
}

impl<S: Scalar> ValidationReport<S> {
    pub fn passes(&self) -> bool {
        self.bad_row_sums.is_empty()
            && self.out_of_range.is_empty()
            && self.non_finite.is_empty()
            && self.zero_rows.is_empty()
    }
}

impl<S: Scalar> std::fmt::Display for ValidationReport<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passes() {
            return write!(
                f,
                "ok (max row-sum deviation {:e})",
                self.max_row_sum_deviation
            );
        }
        let mut parts = Vec::new();
        if !self.non_finite.is_empty() {
            parts.push(format!("{} non-finite entries", self.non_finite.len()));
        }
        if !self.out_of_range.is_empty() {
            parts.push(format!("{} entries outside [0,1]", self.out_of_range.len()));
        }
        if !self.bad_row_sums.is_empty() {
            parts.push(format!(
                "{} rows off-stochastic (worst deviation {:e})",
                self.bad_row_sums.len(),
                self.max_row_sum_deviation
            ));
        }
        if !self.zero_rows.is_empty() {
            parts.push(format!("{} all-zero rows", self.zero_rows.len()));
        }
        write!(f, "{}", parts.join(", "))
    }
}

/// Check the row-stochasticity invariants of a candidate spread matrix.
pub fn validate_rows<S: Scalar>(p: &Matrix<S>) -> ValidationReport<S> {
    let tol = S::row_sum_tolerance();
    let mut report = ValidationReport {
        max_row_sum_deviation: S::zero(),
        bad_row_sums: Vec::new(),
        out_of_range: Vec::new(),
        non_finite: Vec::new(),
        zero_rows: Vec::new(),
    };
    for r in 0..p.n_rows() {
        let mut sum = S::zero();
        let mut any_positive = false;
        for (c, &v) in p.row(r).iter().enumerate() {
            if !v.is_finite() {
                report.non_finite.push((r, c));
                continue;
            }
            if v < S::zero() || v > S::one() {
                report.out_of_range.push((r, c, v));
            }
            if v > S::zero() {
                any_positive = true;
            }
            sum = sum + v;
        }
        let dev = (sum - S::one()).abs();
        report.max_row_sum_deviation = report.max_row_sum_deviation.max(dev);
        if dev > tol {
            report.bad_row_sums.push((r, dev));
        }
        if !any_positive {
            report.zero_rows.push(r);
        }
    }
    report
}
