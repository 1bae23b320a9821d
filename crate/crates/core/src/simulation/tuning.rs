//! Lasso tuning-parameter schemes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{max_abs, select_rows, Matrix, Vector};
use crate::queries::LassoSolver;
use crate::rng::{self, Rng};

/// Monte-Carlo estimate of `E ||X^T psi||_inf` with `psi ~ N(0, sigma2 I)`.
pub fn lambda_theory(x: &Matrix, sigma2: f64, draws: usize, rng: &mut Rng) -> Result<f64> {
    if draws == 0 {
        return Err(domain("lambda_theory needs at least one draw"));
    }
    if !(sigma2 > 0.0) {
        return Err(domain("noise variance must be positive"));
    }
    let sd = sigma2.sqrt();
    let xt = x.transpose();
    let total: f64 = (0..draws)
        .map(|_| max_abs(&(&xt * rng::std_normal_vec(rng, x.nrows()))) * sd)
        .sum();
    Ok(total / draws as f64)
}

/// Cross-validation curve over a decreasing lambda grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPath {
    pub lambdas: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
    pub cv_min: f64,
    pub cv_1se: f64,
}

pub const CV_GRID_SIZE: usize = 100;
/// The grid spans `lambda_max` down to `lambda_max / 10^CV_GRID_DECADES`.
pub const CV_GRID_DECADES: f64 = 4.0;

/// Log-spaced grid from `max |X^T y|` down four decades.
pub fn lambda_grid(x: &Matrix, y: &Vector) -> Vec<f64> {
    let top = max_abs(&(x.transpose() * y));
    (0..CV_GRID_SIZE)
        .map(|k| top * 10f64.powf(-CV_GRID_DECADES * k as f64 / (CV_GRID_SIZE - 1) as f64))
        .collect()
}

/// K-fold cross-validation of the canonical lasso (no randomization, no
/// ridge term) with warm starts along the grid.
pub fn cross_validate_lambda(x: &Matrix, y: &Vector, folds: usize, rng: &mut Rng) -> Result<CvPath> {
    let n = x.nrows();
    if folds < 2 {
        return Err(domain(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(domain(format!("{folds} folds exceed {n} observations")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let lambdas = lambda_grid(x, y);
    if !(lambdas[0] > 0.0) {
        return Err(domain("X^T y is zero; no lambda grid"));
    }
    let solver = LassoSolver {
        tol: 1e-9,
        ..LassoSolver::default()
    };
    let zero = Vector::zeros(x.ncols());

    let per_fold = (0..folds)
        .map(|k| -> Result<Vec<f64>> {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| i % folds == k);
            let test: Vec<usize> = test.into_iter().map(|i| order[i]).collect();
            let train: Vec<usize> = train.into_iter().map(|i| order[i]).collect();
            let (xtr, xte) = (select_rows(x, &train), select_rows(x, &test));
            let ytr = Vector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
            let yte = Vector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
            let mut warm = zero.clone();
            lambdas
                .iter()
                .map(|&lam| {
                    warm = solver.coordinate_descent(&xtr, &ytr, &zero, lam, 0.0, Some(&warm))?;
                    Ok((&yte - &xte * &warm).norm_squared() / test.len() as f64)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    // errors[g][k]: grid point g, fold k.
    let errors: Vec<Vec<f64>> = (0..lambdas.len()).map(|g| per_fold.iter().map(|f| f[g]).collect()).collect();

    let kf = folds as f64;
    let mean_error: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / kf).collect();
    let std_error: Vec<f64> = errors
        .iter()
        .zip(&mean_error)
        .map(|(e, m)| (e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (kf - 1.0) / kf).sqrt())
        .collect();
    let best = (0..lambdas.len())
        .min_by(|&a, &b| mean_error[a].total_cmp(&mean_error[b]))
        .expect("nonempty grid");
    let cutoff = mean_error[best] + std_error[best];
    // The grid is decreasing, so the first index within the cutoff is the largest lambda.
    let one_se = (0..=best).find(|&g| mean_error[g] <= cutoff).unwrap_or(best);
    Ok(CvPath {
        cv_min: lambdas[best],
        cv_1se: lambdas[one_se],
        lambdas,
        mean_error,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_four_decades() {
        let x = Matrix::identity(3, 2);
        let y = Vector::from_vec(vec![2.0, -1.0, 0.0]);
        let g = lambda_grid(&x, &y);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 2.0);
        assert!((g[99] - 2e-4).abs() < 1e-15);
    }

    #[test]
    fn rejects_one_fold() {
        let mut r = rng::stream(0, 0);
        assert!(cross_validate_lambda(&Matrix::identity(4, 2), &Vector::zeros(4), 1, &mut r).is_err());
    }
}
