//! Small dense row-major matrices and the Cholesky-based routines the
//! divergence code needs. Sized for desk-scale work (documented cap 64×64);
//! nothing here is blocked or sparse.

use serde::{Deserialize, Serialize};

use super::NumericsError;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericsError::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NumericsError> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if v.len() != self.cols {
            return Err(NumericsError::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Entrywise `(self + other) / 2`.
    pub fn average(&self, other: &Matrix) -> Result<Matrix, NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch {
                expected: self.data.len(),
                found: other.data.len(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_symmetric(&self) -> Result<(), NumericsError> {
        if !self.is_square() {
            return Err(NumericsError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        for i in 0..self.rows {
            for j in 0..i {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular `L` with `L·Lᵀ = m`.
///
/// Fails with `NotPositiveDefinite` at the first non-positive pivot.
pub fn cholesky(m: &Matrix) -> Result<Matrix, NumericsError> {
    m.check_symmetric()?;
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { pivot: j });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `ln det m` for a symmetric positive definite `m`.
pub fn log_det(m: &Matrix) -> Result<f64, NumericsError> {
    let l = cholesky(m)?;
    Ok(log_det_from_factor(&l))
}

pub(crate) fn log_det_from_factor(l: &Matrix) -> f64 {
    2.0 * (0..l.rows).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Solves `m·x = v` for symmetric positive definite `m`.
pub fn solve(m: &Matrix, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
    if v.len() != m.rows {
        return Err(NumericsError::DimensionMismatch {
            expected: m.rows,
            found: v.len(),
        });
    }
    let l = cholesky(m)?;
    Ok(solve_with_factor(&l, v))
}

pub(crate) fn solve_with_factor(l: &Matrix, v: &[f64]) -> Vec<f64> {
    let n = l.rows;
    // forward: L y = v
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (v[i] - s) / l[(i, i)];
    }
    // backward: Lᵀ x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{gaussian_sample, RngState};
    use proptest::prelude::*;

    fn reconstruct(l: &Matrix) -> Matrix {
        l.matmul(&l.transpose()).unwrap()
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        assert_eq!(cholesky(&Matrix::identity(2)).unwrap(), Matrix::identity(2));
        let l = cholesky(&Matrix::diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(l, Matrix::diagonal(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_dense() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert_eq!(l[(0, 1)], 0.0);
        assert!(reconstruct(&l).max_abs_diff(&m) <= 1e-9);
    }

    #[test]
    fn cholesky_rejects_indefinite_and_asymmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(
            cholesky(&m),
            Err(NumericsError::NotPositiveDefinite { pivot: 1 })
        );
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&m),
            Err(NumericsError::NotSymmetric { .. })
        ));
        let z = Matrix::zeros(2, 2);
        assert!(matches!(
            cholesky(&z),
            Err(NumericsError::NotPositiveDefinite { pivot: 0 })
        ));
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det(&Matrix::identity(3)).unwrap(), 0.0);
        let got = log_det(&Matrix::diagonal(&[4.0, 9.0])).unwrap();
        assert!((got - 36f64.ln()).abs() < 1e-14);
        assert!((got - 3.5835).abs() < 1e-4);
    }

    #[test]
    fn solve_identity_is_noop() {
        let v = vec![1.5, -2.0, 0.25];
        assert_eq!(solve(&Matrix::identity(3), &v).unwrap(), v);
        assert!(solve(&Matrix::identity(3), &[1.0]).is_err());
    }

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let g = gaussian_sample(&mut RngState::new(seed), n * n);
        let a = Matrix::from_row_major(n, n, g).unwrap();
        let mut m = a.matmul(&a.transpose()).unwrap();
        for i in 0..n {
            m[(i, i)] += 0.5;
        }
        m
    }

    proptest! {
        #[test]
        fn cholesky_round_trip(n in 1usize..=16, seed in any::<u64>()) {
            let m = random_spd(n, seed);
            let l = cholesky(&m).unwrap();
            prop_assert!(reconstruct(&l).max_abs_diff(&m) <= 1e-9);
        }

        #[test]
        fn solve_residual_small(n in 1usize..=16, seed in any::<u64>()) {
            let m = random_spd(n, seed);
            let v = gaussian_sample(&mut RngState::new(seed ^ 0xABCD), n);
            let x = solve(&m, &v).unwrap();
            let back = m.matvec(&x).unwrap();
            let scale = v.iter().map(|x| x.abs()).fold(1.0, f64::max);
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-8 * scale);
            }
        }
    }
}
