//! Randomized lasso by cyclic coordinate descent.
//!
//! Minimizes `0.5 ||y - X o||^2 + lambda ||o||_1 + 0.5 eps ||o||^2 - omega^T o`.

use crate::error::{domain, Error, Result};
use crate::linalg::{select_columns, select_entries, Matrix, SpdFactor, Vector};

use super::{complement, Dataset, Penalty, RandomizationSpec, SelectionOutcome};

/// Coordinate-descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoSolver {
    /// Stop when the largest coordinate update in a full sweep is below this
    /// (relative to `max(1, ||o||_inf)`).
    pub tol: f64,
    /// Coefficients with `|o_j|` at or below this are treated as zero.
    pub active_threshold: f64,
    pub max_sweeps: usize,
    /// KKT residual accepted after polishing (relative to the data scale).
    pub kkt_tol: f64,
}

impl Default for LassoSolver {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            active_threshold: 1e-10,
            max_sweeps: 100_000,
            kkt_tol: 1e-8,
        }
    }
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

impl LassoSolver {
    /// Coordinate descent from `warm` (or zero). `omega` may be all zeros and
    /// `epsilon` zero for the canonical lasso.
    pub fn coordinate_descent(
        &self,
        x: &Matrix,
        y: &Vector,
        omega: &Vector,
        lambda: f64,
        epsilon: f64,
        warm: Option<&Vector>,
    ) -> Result<Vector> {
        let p = x.ncols();
        let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() + epsilon).collect();
        let mut o = warm.cloned().unwrap_or_else(|| Vector::zeros(p));
        let mut resid = y - x * &o;

        let update = |j: usize, o: &mut Vector, resid: &mut Vector| -> f64 {
            if norms[j] <= 0.0 {
                return 0.0;
            }
            let old = o[j];
            let rho = x.column(j).dot(resid) + (norms[j] - epsilon) * old + omega[j];
            let new = soft(rho, lambda) / norms[j];
            let delta = new - old;
            if delta != 0.0 {
                resid.axpy(-delta, &x.column(j), 1.0);
                o[j] = new;
            }
            delta.abs()
        };

        let mut last = f64::INFINITY;
        for _ in 0..self.max_sweeps {
            let mut biggest: f64 = 0.0;
            for j in 0..p {
                biggest = biggest.max(update(j, &mut o, &mut resid));
            }
            last = biggest;
            let scale = crate::linalg::max_abs(&o).max(1.0);
            if biggest < self.tol * scale {
                return Ok(o);
            }
            // Sweep the current support until it settles.
            let support: Vec<usize> = (0..p).filter(|&j| o[j] != 0.0).collect();
            for _ in 0..self.max_sweeps {
                let mut inner: f64 = 0.0;
                for &j in &support {
                    inner = inner.max(update(j, &mut o, &mut resid));
                }
                if inner < self.tol * scale {
                    break;
                }
            }
        }
        Err(Error::NotConverged {
            solver: "lasso coordinate descent",
            iterations: self.max_sweeps,
            residual: last,
        })
    }
}

/// Randomized lasso with the draw from `rand`.
pub fn solve_randomized_lasso(
    data: &Dataset,
    rand: &RandomizationSpec,
    lambda: f64,
    epsilon: f64,
) -> Result<SelectionOutcome> {
    if rand.dim() != data.p() {
        return Err(domain("randomization dimension differs from number of columns"));
    }
    lasso_with_omega(data, &rand.draw(), lambda, epsilon)
}

/// Randomized lasso for a given realization of the randomization.
pub fn lasso_with_omega(
    data: &Dataset,
    omega: &Vector,
    lambda: f64,
    epsilon: f64,
) -> Result<SelectionOutcome> {
    lasso_with_solver(&LassoSolver::default(), data, omega, lambda, epsilon)
}

pub fn lasso_with_solver(
    solver: &LassoSolver,
    data: &Dataset,
    omega: &Vector,
    lambda: f64,
    epsilon: f64,
) -> Result<SelectionOutcome> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if omega.len() != data.p() {
        return Err(domain("randomization length differs from number of columns"));
    }
    let (x, y) = (&data.x, &data.y);
    let p = data.p();
    let cd = solver.coordinate_descent(x, y, omega, lambda, epsilon, None)?;
    let active: Vec<usize> = (0..p).filter(|&j| cd[j].abs() > solver.active_threshold).collect();
    if active.is_empty() {
        return Err(Error::EmptySelection);
    }
    let signs: Vec<f64> = active.iter().map(|&j| cd[j].signum()).collect();
    let solution = polish(x, y, omega, lambda, epsilon, &active, &signs).unwrap_or(cd);

    let grad = x.transpose() * (y - x * &solution) + omega;
    let scale = crate::linalg::max_abs(&(x.transpose() * y + omega)).max(1.0);
    let mut residual: f64 = 0.0;
    for (&j, &z) in active.iter().zip(&signs) {
        if solution[j].signum() != z {
            residual = f64::INFINITY;
        }
        residual = residual.max((grad[j] - epsilon * solution[j] - lambda * z).abs());
    }
    let inactive = complement(p, &active);
    for &j in &inactive {
        residual = residual.max(grad[j].abs() - lambda);
    }
    if !(residual < solver.kkt_tol * scale) {
        return Err(Error::NotConverged {
            solver: "lasso KKT check",
            iterations: solver.max_sweeps,
            residual,
        });
    }

    let mut subgradient = grad.clone();
    for (&j, &z) in active.iter().zip(&signs) {
        subgradient[j] = lambda * z;
    }
    Ok(SelectionOutcome {
        penalty: Penalty::Lasso { lambda, epsilon },
        o1: select_entries(&solution, &active),
        o2: select_entries(&grad, &inactive),
        signs,
        active,
        inactive,
        clusters: Vec::new(),
        omega: omega.clone(),
        solution,
        subgradient,
        kkt_residual: residual,
    })
}

/// Solves the active-set stationarity equations exactly. Returns `None` when
/// the polished point changes a sign or violates an inactive bound.
fn polish(
    x: &Matrix,
    y: &Vector,
    omega: &Vector,
    lambda: f64,
    epsilon: f64,
    active: &[usize],
    signs: &[f64],
) -> Option<Vector> {
    let xe = select_columns(x, active);
    let mut gram = xe.transpose() * &xe;
    for i in 0..active.len() {
        gram[(i, i)] += epsilon;
    }
    let z = Vector::from_column_slice(signs);
    let rhs = xe.transpose() * y + select_entries(omega, active) - z * lambda;
    let oe = SpdFactor::new(&gram, "lasso polish").ok()?.solve_vec(&rhs);
    if oe.iter().zip(signs).any(|(v, s)| v * s <= 0.0) {
        return None;
    }
    let mut full = Vector::zeros(x.ncols());
    for (i, &j) in active.iter().enumerate() {
        full[j] = oe[i];
    }
    let grad = x.transpose() * (y - x * &full) + omega;
    let inactive = complement(x.ncols(), active);
    if inactive.iter().any(|&j| grad[j].abs() >= lambda) {
        return None;
    }
    Some(full)
}

/// Value of the randomized lasso objective.
pub fn objective(x: &Matrix, y: &Vector, omega: &Vector, lambda: f64, epsilon: f64, o: &Vector) -> f64 {
    0.5 * (y - x * o).norm_squared() + lambda * o.lp_norm(1) + 0.5 * epsilon * o.norm_squared()
        - omega.dot(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_soft_threshold_with_ridge() {
        let data = Dataset::new(Matrix::from_element(1, 1, 1.0), Vector::from_element(1, 2.0), 1.0)
            .unwrap();
        let out = lasso_with_omega(&data, &Vector::from_element(1, 1.0), 1.0, 0.5).unwrap();
        assert!((out.solution[0] - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(out.active, vec![0]);
        assert_eq!(out.signs, vec![1.0]);
    }

    #[test]
    fn huge_lambda_is_empty() {
        let data = Dataset::new(
            Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
            Vector::from_vec(vec![1.0, -2.0, 0.5]),
            1.0,
        )
        .unwrap();
        let omega = Vector::from_vec(vec![0.3, -0.1]);
        let lam = 10.0 * crate::linalg::max_abs(&(data.x.transpose() * &data.y + &omega));
        assert_eq!(lasso_with_omega(&data, &omega, lam, 0.1), Err(Error::EmptySelection));
    }

    #[test]
    fn rejects_bad_tuning() {
        let data = Dataset::new(Matrix::identity(2, 2), Vector::zeros(2), 1.0).unwrap();
        assert!(lasso_with_omega(&data, &Vector::zeros(2), 0.0, 0.1).is_err());
        assert!(lasso_with_omega(&data, &Vector::zeros(2), 1.0, -0.1).is_err());
    }
}
