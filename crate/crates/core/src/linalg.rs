//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Cholesky factor of a symmetric positive definite matrix.
///
/// When the plain factorization fails, a single diagonal jitter of
/// `1e-10 * trace / dim` is added and the amount is kept in [`SpdFactor::jitter`].
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl SpdFactor {
    pub fn new(m: &Matrix, what: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Singular(format!("{what}: matrix is not square")));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("{what}: non-finite entries")));
        }
        let sym = symmetrize(m);
        if let Some(chol) = Cholesky::new(sym.clone()) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let dim = sym.nrows().max(1) as f64;
        let jitter = 1e-10 * sym.trace().abs().max(f64::MIN_POSITIVE) / dim;
        let mut shifted = sym;
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        Cholesky::new(shifted)
            .map(|chol| Self { chol, jitter })
            .ok_or_else(|| Error::Singular(format!("{what}: not positive definite")))
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> Matrix {
        symmetrize(&self.chol.inverse())
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn spd_inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    Ok(SpdFactor::new(m, what)?.inverse())
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Columns of `x` listed in `idx`, in that order.
pub fn select_columns(x: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}

pub fn select_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

pub fn select_entries(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_matrix(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
