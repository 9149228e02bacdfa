//! Multiplicative EM (MLEM) iteration for the Poisson emission model.
//!
//! One step maps the current charge profile `lambda` to
//!
//! ```text
//! lambda_b <- lambda_b * sum_d n_d p(b,d) / g_d,      g = P^T lambda
//! ```
//!
//! which is monotone in the incomplete-data log-likelihood
//! `L(lambda) = sum_d [ n_d ln g_d - g_d ]`, conserves total mass whenever
//! the rows of `P` sum to one, and never resurrects a pixel that has reached
//! exactly zero. The fixed points are exactly the points where the score
//! vanishes on the support of `lambda`.

use crate::scalar::Scalar;
use crate::system::{ChargeVector, DetectorCounts, Projection, SystemMatrix};
use crate::{Error, Result};

/// Iteration controls for [`run_em`].
#[derive(Clone, Debug)]
pub struct EmConfig<S> {
    /// Hard iteration budget (must be at least 1).
    pub max_iterations: usize,
    /// Early-stop threshold on the fixed-point residual
    /// `max_b |sum_d n_d p(b,d)/g_d - 1|`; zero disables early stopping.
    pub stop_tolerance: S,
    /// Record the log-likelihood of every iterate.
    pub record_log_likelihood: bool,
    /// Record every iterate (memory scales with `max_iterations * B`).
    pub record_trajectory: bool,
}

impl<S: Scalar> EmConfig<S> {
    pub fn new(max_iterations: usize) -> Self {
        EmConfig {
            max_iterations,
            stop_tolerance: S::zero(),
            record_log_likelihood: false,
            record_trajectory: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.stop_tolerance >= S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "stop_tolerance must be nonnegative, got {}",
                self.stop_tolerance
            )));
        }
        Ok(())
    }
}

/// Snapshot of the iteration at a single iterate.
#[derive(Clone, Debug)]
pub struct EmState<S> {
    /// Index of the iterate (0 = the starting point).
    pub iteration: usize,
    pub lambda: ChargeVector<S>,
    pub projection: Projection<S>,
    pub log_likelihood: S,
    /// Fixed-point residual `max_b |sum_d n_d p(b,d)/g_d - 1|` at this iterate.
    pub max_residual: S,
}

/// Result of a full EM run.
#[derive(Clone, Debug)]
pub struct EmRun<S> {
    pub final_state: EmState<S>,
    /// Number of multiplicative steps actually applied.
    pub iterations_run: usize,
    /// Whether the residual reached `stop_tolerance` within the budget.
    pub converged: bool,
    /// Log-likelihood of iterates 0..=iterations_run (present iff requested).
    pub log_likelihood_trace: Option<Vec<S>>,
    /// Iterates 0..=iterations_run (present iff requested).
    pub trajectory: Option<Vec<Vec<S>>>,
}

/// Detector weights `n_d / g_d` shared by the EM ratio, the score and the
/// fixed-point residual. Fails if a detector with observed counts has zero
/// (or non-positive) projected mass, since the likelihood is then undefined.
fn detector_weights<S: Scalar>(counts: &DetectorCounts, g: &[S]) -> Result<Vec<S>> {
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
        w[d] = S::from_u64(n).unwrap() / gd;
    }
    Ok(w)
}

/// EM update ratios `r_b = sum_d n_d p(b,d) / g_d` for a given projection.
fn update_ratios<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    g: &[S],
) -> Result<Vec<S>> {
    let w = detector_weights(counts, g)?;
    let mut r = vec![S::zero(); system.n_pixels()];
    for (b, rb) in r.iter_mut().enumerate() {
        let mut s = S::zero();
        for (&pbd, &wd) in system.row(b).iter().zip(&w) {
            s = s + pbd * wd;
        }
        *rb = s;
    }
    Ok(r)
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

/// One multiplicative EM step.
pub fn em_step<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    lambda: &ChargeVector<S>,
) -> Result<ChargeVector<S>> {
    check_dims(system, counts, lambda)?;
    let g = crate::system::forward_project(system, lambda)?;
    let r = update_ratios(system, counts, g.as_slice())?;
    let next = lambda
        .as_slice()
        .iter()
        .zip(&r)
        .map(|(&l, &rb)| l * rb)
        .collect();
    Ok(ChargeVector::from_raw(next))
}

/// Incomplete-data log-likelihood `sum_d [ n_d ln g_d - g_d ]`, with the
/// convention `0 ln 0 = 0` for detectors that observed nothing.
pub fn incomplete_log_likelihood<S: Scalar>(
    counts: &DetectorCounts,
    projection: &Projection<S>,
) -> Result<S> {
    if counts.len() != projection.len() {
        return Err(Error::DimensionMismatch {
            what: "detector counts vs. projection",
            expected: projection.len(),
            actual: counts.len(),
        });
    }
    let mut ll = S::zero();
    for (d, (&n, &gd)) in counts
        .as_slice()
        .iter()
        .zip(projection.as_slice())
        .enumerate()
    {
        if n == 0 {
            ll = ll - gd;
            continue;
        }
        if !(gd > S::zero()) {
            return Err(Error::DegenerateSupport {
                detector: d + 1,
                count: n,
            });
        }
        ll = ll + S::from_u64(n).unwrap() * gd.ln() - gd;
    }
    Ok(ll)
}

/// Score (gradient of the incomplete log-likelihood):
/// `S_b = -1 + sum_d n_d p(b,d) / g_d`.
pub fn score<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    lambda: &ChargeVector<S>,
) -> Result<Vec<S>> {
    check_dims(system, counts, lambda)?;
    let g = crate::system::forward_project(system, lambda)?;
    let r = update_ratios(system, counts, g.as_slice())?;
    Ok(r.into_iter().map(|rb| rb - S::one()).collect())
}

/// Run the EM iteration from `init` until the fixed-point residual drops to
/// `stop_tolerance` or the iteration budget is exhausted.
pub fn run_em<S: Scalar>(
    system: &SystemMatrix<S>,
    counts: &DetectorCounts,
    init: &ChargeVector<S>,
    config: &EmConfig<S>,
) -> Result<EmRun<S>> {
    config.validate()?;
    check_dims(system, counts, init)?;

    let mut lambda = init.clone();
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut ll_trace = config.record_log_likelihood.then(Vec::new);
    let mut converged = false;
    let mut iteration = 0;

    loop {
        let g = crate::system::forward_project(system, &lambda)?;
        let r = update_ratios(system, counts, g.as_slice())?;
        let residual = r
            .iter()
            .fold(S::zero(), |m, &rb| m.max((rb - S::one()).abs()));

        if let Some(t) = trajectory.as_mut() {
            t.push(lambda.as_slice().to_vec());
        }
        if let Some(t) = ll_trace.as_mut() {
            t.push(incomplete_log_likelihood(counts, &g)?);
        }

        if residual <= config.stop_tolerance {
            converged = true;
        }
        if converged || iteration == config.max_iterations {
            let log_likelihood = incomplete_log_likelihood(counts, &g)?;
            return Ok(EmRun {
                final_state: EmState {
                    iteration,
                    lambda,
                    projection: g,
                    log_likelihood,
                    max_residual: residual,
                },
                iterations_run: iteration,
                converged,
                log_likelihood_trace: ll_trace,
                trajectory,
            });
        }

        let next: Vec<S> = lambda
            .as_slice()
            .iter()
            .zip(&r)
            .map(|(&l, &rb)| l * rb)
            .collect();
        lambda = ChargeVector::from_raw(next);
        iteration += 1;
    }
}
