//! Gaussian population summaries fitted from observation matrices.

use serde::{Deserialize, Serialize};

use super::{cholesky, Matrix, NumericsError};

/// Mean vector and covariance of a (possibly multivariate) normal population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    mean: Vec<f64>,
    cov: Matrix,
}

impl GaussianSummary {
    /// Validates that `cov` is square, matches `mean`, and factors.
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self, NumericsError> {
        if !cov.is_square() {
            return Err(NumericsError::NotSquare {
                rows: cov.rows(),
                cols: cov.cols(),
            });
        }
        if cov.rows() != mean.len() {
            return Err(NumericsError::DimensionMismatch {
                expected: cov.rows(),
                found: mean.len(),
            });
        }
        cholesky(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self, NumericsError> {
        Self::new(vec![mean], Matrix::diagonal(&[variance]))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// Variance of the first coordinate.
    pub fn variance(&self) -> f64 {
        self.cov[(0, 0)]
    }
}

/// Ridge added to a fitted covariance: `max(1e-8, 1e-10 · trace / m)`.
pub fn regularization(cov: &Matrix) -> f64 {
    (1e-10 * cov.trace() / cov.rows() as f64).max(1e-8)
}

/// Sample mean and unbiased covariance of `samples` (rows are observations,
/// columns are variables), with `regularization` added to the diagonal.
pub fn fit_gaussian_summary(samples: &Matrix) -> Result<GaussianSummary, NumericsError> {
    let (n, m) = (samples.rows(), samples.cols());
    if n < 2 {
        return Err(NumericsError::TooFewSamples(n));
    }
    let mut mean = vec![0.0; m];
    for i in 0..n {
        for (j, (acc, &x)) in mean.iter_mut().zip(samples.row(i)).enumerate() {
            if !x.is_finite() {
                return Err(NumericsError::NonFiniteSample { row: i, col: j });
            }
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);

    let mut cov = Matrix::zeros(m, m);
    let mut centred = vec![0.0; m];
    for i in 0..n {
        for (c, (x, mu)) in centred.iter_mut().zip(samples.row(i).iter().zip(&mean)) {
            *c = x - mu;
        }
        for a in 0..m {
            for b in 0..=a {
                cov[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..=a {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let ridge = regularization(&cov);
    for a in 0..m {
        cov[(a, a)] += ridge;
    }
    GaussianSummary::new(mean, cov)
}
