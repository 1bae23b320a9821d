//! Randomized selection queries and their affine KKT representation.
//!
//! Each solver returns a [`SelectionOutcome`] recording what was selected and
//! the optimization variables needed to rewrite the KKT conditions as
//! `omega = P beta_hat + Q o1 + r` with `U o1 < v`.

pub mod kkt;
pub mod lasso;
pub mod screening;
pub mod slope;
pub mod target;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{Matrix, SpdFactor, Vector};
use crate::rng;

pub use kkt::{decompose_data_term, kkt, lasso_kkt, ms_kkt, slope_kkt, KktAffine};
pub use lasso::{lasso_with_omega, solve_randomized_lasso, LassoSolver};
pub use screening::{screening_thresholds, screening_with_omega, solve_marginal_screening};
pub use slope::{slope_prox, slope_with_omega, solve_randomized_slope, SlopeFit};
pub use target::{build_target, TargetKind, TargetModel};

/// Fixed-design regression data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vector,
    pub sigma2: f64,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vector, sigma2: f64) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(domain("design must have at least one row and one column"));
        }
        if x.nrows() != y.len() {
            return Err(domain(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(domain(format!("noise variance must be positive, got {sigma2}")));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(domain("data contain non-finite values"));
        }
        Ok(Self { x, y, sigma2 })
    }

    /// Uses the OLS residual variance `||(I - H) y||^2 / (n - p)`.
    pub fn with_estimated_sigma2(x: Matrix, y: Vector) -> Result<Self> {
        let sigma2 = ols_sigma2(&x, &y)?;
        Self::new(x, y, sigma2)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Same response and noise level, design restricted to `cols`.
    pub fn restrict(&self, cols: &[usize]) -> Self {
        Self {
            x: crate::linalg::select_columns(&self.x, cols),
            y: self.y.clone(),
            sigma2: self.sigma2,
        }
    }
}

pub fn ols_sigma2(x: &Matrix, y: &Vector) -> Result<f64> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(domain(format!("estimating sigma^2 needs n > p (n={n}, p={p})")));
    }
    let gram = x.transpose() * x;
    let coef = SpdFactor::new(&gram, "X^T X")?.solve_vec(&(x.transpose() * y));
    let resid = y - x * coef;
    let s2 = resid.norm_squared() / (n - p) as f64;
    if !(s2 > 0.0) {
        return Err(Error::Numerical("OLS residual variance is zero".into()));
    }
    Ok(s2)
}

/// Gaussian randomization `W ~ N(0, cov)` with a fixed seed.
#[derive(Debug, Clone)]
pub struct RandomizationSpec {
    pub cov: Matrix,
    pub seed: u64,
    factor: Matrix,
}

impl RandomizationSpec {
    pub fn new(cov: Matrix, seed: u64) -> Result<Self> {
        let asym = crate::linalg::max_abs_matrix(&(&cov - cov.transpose()));
        if asym > 1e-12 * crate::linalg::max_abs_matrix(&cov).max(1.0) {
            return Err(domain("randomization covariance must be symmetric"));
        }
        let chol = nalgebra::Cholesky::new(cov.clone())
            .ok_or_else(|| domain("randomization covariance must be positive definite"))?;
        Ok(Self {
            factor: chol.l(),
            cov,
            seed,
        })
    }

    pub fn isotropic(p: usize, eta2: f64, seed: u64) -> Result<Self> {
        if !(eta2 > 0.0) {
            return Err(domain(format!("randomization variance must be positive, got {eta2}")));
        }
        Self::new(Matrix::identity(p, p) * eta2, seed)
    }

    /// `eta2 = ratio * sigma2` with the data's noise variance.
    pub fn for_data(data: &Dataset, ratio: f64, seed: u64) -> Result<Self> {
        Self::isotropic(data.p(), ratio * data.sigma2, seed)
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// The draw on stream 0 of the seed.
    pub fn draw(&self) -> Vector {
        self.draw_stream(0)
    }

    pub fn draw_stream(&self, index: u64) -> Vector {
        let mut rng = rng::stream(self.seed, index);
        &self.factor * rng::std_normal_vec(&mut rng, self.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Lasso,
    Screening,
    Slope,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    Lasso { lambda: f64, epsilon: f64 },
    Screening { thresholds: Vector },
    Slope { lambdas: Vector },
}

/// What a solved query selected, plus the optimization variables that
/// parameterize its selection event.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub penalty: Penalty,
    /// Selected variables, ascending.
    pub active: Vec<usize>,
    /// Sign of each selected variable.
    pub signs: Vec<f64>,
    pub inactive: Vec<usize>,
    /// Active optimization variables. For SLOPE these are one signed value
    /// per cluster, clusters ordered by decreasing magnitude.
    pub o1: Vector,
    /// Inactive subgradient values (lasso, SLOPE) or statistics (screening).
    pub o2: Vector,
    /// SLOPE clusters by decreasing magnitude; empty for other queries.
    pub clusters: Vec<Vec<usize>>,
    /// Realized randomization.
    pub omega: Vector,
    /// Full-length solution of the query.
    pub solution: Vector,
    /// Full-length penalty subgradient at the solution.
    pub subgradient: Vector,
    pub kkt_residual: f64,
}

impl SelectionOutcome {
    pub fn kind(&self) -> QueryKind {
        match self.penalty {
            Penalty::Lasso { .. } => QueryKind::Lasso,
            Penalty::Screening { .. } => QueryKind::Screening,
            Penalty::Slope { .. } => QueryKind::Slope,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Sign of each entry of `o1`.
    pub fn o1_signs(&self) -> Vec<f64> {
        self.o1.iter().map(|v| v.signum()).collect()
    }
}

pub(crate) fn complement(p: usize, active: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; p];
    for &j in active {
        mask[j] = true;
    }
    (0..p).filter(|&j| !mask[j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        let x = Matrix::from_element(3, 2, 1.0);
        assert!(Dataset::new(x.clone(), Vector::zeros(2), 1.0).is_err());
        assert!(Dataset::new(x.clone(), Vector::zeros(3), 0.0).is_err());
        assert!(Dataset::new(x, Vector::from_element(3, f64::NAN), 1.0).is_err());
    }

    #[test]
    fn sigma2_needs_more_rows_than_columns() {
        let x = Matrix::identity(3, 3);
        assert!(Dataset::with_estimated_sigma2(x, Vector::zeros(3)).is_err());
    }

    #[test]
    fn ols_sigma2_known_value() {
        // One intercept column: residual variance is the sample variance.
        let x = Matrix::from_element(4, 1, 1.0);
        let y = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let s2 = ols_sigma2(&x, &y).unwrap();
        assert!((s2 - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn randomization_draw_is_seeded() {
        let r = RandomizationSpec::isotropic(4, 2.0, 11).unwrap();
        assert_eq!(r.draw(), r.draw());
        let other = RandomizationSpec::isotropic(4, 2.0, 12).unwrap();
        assert_ne!(r.draw(), other.draw());
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(RandomizationSpec::new(bad, 0).is_err());
    }
}
