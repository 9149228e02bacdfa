//! Maximum-likelihood reconstruction of Poisson emission profiles with
//! attached uncertainty.
//!
//! The library covers a one-dimensional emission-tomography model: a charge
//! profile `lambda` over `B` pixels emits counts that are smeared into `D`
//! detector bins by a row-stochastic system matrix `P`, and each detector
//! observes a Poisson count with mean `T * g_d`, `g = P^T lambda`. On top of
//! the classic multiplicative EM (MLEM) iteration the crate provides
//!
//! * the closed-form observed Fisher information of the incomplete-data
//!   likelihood at the EM fixed point ([`fisher`]),
//! * an independent finite-difference oracle for that matrix ([`fisher::fisher_fd_oracle`]),
//! * standard-error / correlation / noise-to-signal reports derived from the
//!   inverse information, including cheap small-minor approximations
//!   ([`uncertainty`]),
//! * a deterministic, parallel Monte-Carlo harness that validates the
//!   closed-form uncertainties against empirical replicate scatter ([`sim`]).
//!
//! Everything numeric is generic over the floating-point scalar through the
//! [`scalar::Scalar`] trait (implemented for `f32` and `f64`); the crate root
//! re-exports `f64`-concrete aliases for the common types since that is the
//! precision the validation protocol is specified in.

// `!(x > 0)` is used deliberately throughout: unlike `x <= 0` it also
// rejects NaN, which must never slip past a positivity check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod em;
mod error;
pub mod fisher;
pub mod io;
pub mod linalg;
pub mod report;
pub mod scalar;
pub mod sim;
pub mod system;
pub mod uncertainty;

mod dd;

pub use error::Error;
pub use scalar::Scalar;

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

// `f64`-concrete aliases for the main types. The generic forms live in their
// modules; these are the names most downstream code (and the CLI) uses.
pub type Matrix64 = linalg::Matrix<f64>;
pub type SystemMatrix64 = system::SystemMatrix<f64>;
pub type ChargeVector64 = system::ChargeVector<f64>;
pub type Projection64 = system::Projection<f64>;
pub type ExposureScale64 = system::ExposureScale<f64>;
pub type EmConfig64 = em::EmConfig<f64>;
pub type EmState64 = em::EmState<f64>;
pub type EmRun64 = em::EmRun<f64>;
pub type FisherMatrix64 = fisher::FisherMatrix<f64>;
pub type CovarianceEstimate64 = uncertainty::CovarianceEstimate<f64>;
pub type Scenario64 = sim::Scenario<f64>;
pub type MonteCarloResult64 = sim::MonteCarloResult<f64>;
