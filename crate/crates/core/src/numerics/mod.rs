//! Numerical substrate shared by every other module: seeded Gaussian draws,
//! small dense linear algebra, adaptive quadrature and Gaussian fitting.

mod linalg;
mod quadrature;
mod rng;
mod stats;

pub use linalg::{cholesky, log_det, solve, Matrix};
pub(crate) use linalg::{log_det_from_factor, solve_with_factor};
pub use quadrature::quadrature;
pub use rng::{gaussian_sample, RngState};
pub use stats::{fit_gaussian_summary, regularization, GaussianSummary};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("integration interval [{a}, {b}] is empty or unbounded")]
    InvalidInterval { a: f64, b: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("integrand is not finite at x = {x}")]
    NonFiniteIntegrand { x: f64 },
    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    NonConvergence { estimate: f64, error: f64 },
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite observation at row {row}, column {col}")]
    NonFiniteSample { row: usize, col: usize },
}
