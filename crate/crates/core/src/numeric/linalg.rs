//! Dense vectors and matrices with the small set of factorizations the
//! rest of the crate needs. Row-major storage, desk-scale dimensions.

use crate::error::NumericError;
use crate::scalar::{lit, Scalar};

/// Dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T: Scalar>(pub Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn from_vec(data: Vec<T>) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite entry");
        Vector(data)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dot(&self, other: &Vector<T>) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Vector<T> {
        Vector(self.0.iter().map(|&v| v * s).collect())
    }

    pub fn add(&self, other: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.len(), other.len());
        Vector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.len(), other.len());
        Vector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn axpy_inplace(&mut self, alpha: T, other: &Vector<T>) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += alpha * b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T: Scalar> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Scalar> std::ops::IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            debug_assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite entry");
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vector(&self, i: usize) -> Vector<T> {
        Vector(self.row(i).to_vec())
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector<T> {
        Vector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.cols, v.len());
        Vector(
            (0..self.rows)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(v.0.iter())
                        .map(|(&a, &b)| a * b)
                        .sum()
                })
                .collect(),
        )
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, &b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Rank-one update `self += alpha * u vᵀ`.
    pub fn add_outer_inplace(&mut self, alpha: T, u: &Vector<T>, v: &Vector<T>) {
        debug_assert_eq!(self.rows, u.len());
        debug_assert_eq!(self.cols, v.len());
        for i in 0..self.rows {
            let ui = alpha * u[i];
            for j in 0..self.cols {
                self[(i, j)] += ui * v[j];
            }
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_distance(&self, other: &Matrix<T>) -> T {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn check_symmetric(&self, tol: T) -> Result<(), NumericError> {
        if !self.is_square() {
            return Err(NumericError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return Err(NumericError::Asymmetric {
                        i,
                        j,
                        tol: tol.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }

    /// Extract the principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> Matrix<T> {
        Matrix::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T: Scalar> {
    lower: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factor `m = L Lᵀ`. Fails on non-square or non-SPD input.
    pub fn new(m: &Matrix<T>) -> Result<Self, NumericError> {
        if !m.is_square() {
            return Err(NumericError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        let mut lower = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m[(i, j)];
                for k in 0..j {
                    sum -= lower[(i, k)] * lower[(j, k)];
                }
                if i == j {
                    if sum <= T::zero() || !sum.is_finite() {
                        return Err(NumericError::NotPositiveDefinite { pivot: i });
                    }
                    lower[(i, j)] = sum.sqrt();
                } else {
                    lower[(i, j)] = sum / lower[(j, j)];
                }
            }
        }
        Ok(Cholesky { lower })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// Solve `m x = b` via forward and back substitution.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &Vector<T>) -> Vector<T> {
        let n = self.lower.rows();
        debug_assert_eq!(b.len(), n);
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.lower[(i, k)] * y[k];
            }
            y[i] = sum / self.lower[(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= self.lower[(k, i)] * x[k];
            }
            x[i] = sum / self.lower[(i, i)];
        }
        Vector(x)
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.lower.rows();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// `ln det m = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> T {
        let n = self.lower.rows();
        let two = lit::<T>(2.0);
        (0..n).map(|i| self.lower[(i, i)].ln()).sum::<T>() * two
    }
}

/// `m + eps·I` after validating squareness and symmetry (tolerance 1e-8).
pub fn shrink_spd<T: Scalar>(m: &Matrix<T>, eps: T) -> Result<Matrix<T>, NumericError> {
    m.check_symmetric(lit(1e-8))?;
    let mut out = m.clone();
    for i in 0..out.rows() {
        out[(i, i)] += eps;
    }
    Ok(out)
}

/// Scale-invariant default shrinkage floor: 1e-6 of the trace-average eigenvalue.
pub fn default_shrinkage<T: Scalar>(m: &Matrix<T>) -> T {
    let n = m.rows();
    if n == 0 {
        return T::zero();
    }
    let avg = (m.trace() / lit(n as f64)).abs();
    let floor = lit::<T>(1e-6);
    if avg > T::zero() {
        avg * floor
    } else {
        floor
    }
}

/// Sample mean of the rows of a data matrix.
pub fn row_mean<T: Scalar>(data: &Matrix<T>) -> Vector<T> {
    let n = data.rows();
    let d = data.cols();
    let mut mean = Vector::zeros(d);
    for i in 0..n {
        for j in 0..d {
            mean[j] += data[(i, j)];
        }
    }
    let inv = T::one() / lit(n as f64);
    for j in 0..d {
        mean[j] *= inv;
    }
    mean
}

/// Unbiased sample covariance of the rows of a data matrix.
/// Returns the zero matrix when fewer than two rows are given.
pub fn sample_covariance<T: Scalar>(data: &Matrix<T>) -> Matrix<T> {
    let n = data.rows();
    let d = data.cols();
    let mut cov = Matrix::zeros(d, d);
    if n < 2 {
        return cov;
    }
    let mean = row_mean(data);
    for i in 0..n {
        let row = data.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let inv = T::one() / lit((n - 1) as f64);
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] *= inv;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}
