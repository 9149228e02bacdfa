//! Small dense linear algebra.
//!
//! The matrices this crate touches are tiny (the information matrix of a
//! B-pixel profile is B x B with B in the tens), so a plain row-major `Vec`
//! with textbook Cholesky / Jacobi routines beats pulling in a full linear
//! algebra stack. Everything here is generic over [`Scalar`].

use crate::scalar::Scalar;
use std::ops::{Index, IndexMut};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Build from a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match dimensions");
        Matrix { rows, cols, data }
    }

    /// Build from nested rows (mostly used by tests and small examples).
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> S {
        let mut best = S::zero();
        for c in 0..self.cols {
            let mut s = S::zero();
            for r in 0..self.rows {
                s = s + self[(r, c)].abs();
            }
            best = best.max(s);
        }
        best
    }

    /// Maximum absolute asymmetry `|a_ij - a_ji|` of a square matrix.
    pub fn max_asymmetry(&self) -> S {
        assert!(self.is_square());
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Extract the contiguous `k x k` principal submatrix starting at
    /// (row, col) = (`offset`, `offset`).
    pub fn principal_block(&self, offset: usize, k: usize) -> Matrix<S> {
        assert!(self.is_square() && offset + k <= self.rows);
        let mut out = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = self[(offset + i, offset + j)];
            }
        }
        out
    }
}

impl<S: Scalar> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &S {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Cholesky factorization `A = L L^T` of a symmetric positive-definite
/// matrix. Returns `None` if a pivot fails to be strictly positive, which is
/// the factorization-level signal that `A` is singular or indefinite.
pub fn cholesky<S: Scalar>(a: &Matrix<S>) -> Option<Matrix<S>> {
    assert!(a.is_square());
    let n = a.n_rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= S::zero() || !s.is_finite() {
                    return None;
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve `L y = b` for lower-triangular `L`.
pub fn forward_substitute<S: Scalar>(l: &Matrix<S>, b: &[S]) -> Vec<S> {
    let n = l.n_rows();
    assert_eq!(b.len(), n);
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solve `L^T x = y` for lower-triangular `L`.
pub fn back_substitute<S: Scalar>(l: &Matrix<S>, y: &[S]) -> Vec<S> {
    let n = l.n_rows();
    assert_eq!(y.len(), n);
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Inverse of the SPD matrix factored as `L L^T`, symmetrized so that the
/// result is exactly equal to its transpose.
pub fn spd_inverse_from_cholesky<S: Scalar>(l: &Matrix<S>) -> Matrix<S> {
    let n = l.n_rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![S::zero(); n];
    for j in 0..n {
        e[j] = S::one();
        let y = forward_substitute(l, &e);
        let x = back_substitute(l, &y);
        for i in 0..n {
            inv[(i, j)] = x[i];
        }
        e[j] = S::zero();
    }
    let half = S::c(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (inv[(i, j)] + inv[(j, i)]) * half;
            inv[(i, j)] = m;
            inv[(j, i)] = m;
        }
    }
    inv
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, sorted
/// ascending. Used for condition estimates when Cholesky has already failed,
/// and by tests as a positive-semidefiniteness certificate.
pub fn symmetric_eigenvalues<S: Scalar>(a: &Matrix<S>, max_sweeps: usize) -> Vec<S> {
    assert!(a.is_square());
    let n = a.n_rows();
    let mut m = a.clone();
    let tol = S::epsilon() * S::c(4.0) * m.max_abs().max(S::one());
    for _ in 0..max_sweeps {
        let mut off = S::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * S::c(1e-3) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (S::c(2.0) * apq);
                // Stable tangent of the rotation angle.
                let t = {
                    let s = theta.abs() + (theta * theta + S::one()).sqrt();
                    let t = S::one() / s;
                    if theta < S::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<S> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("non-finite eigenvalue"));
    eig
}
