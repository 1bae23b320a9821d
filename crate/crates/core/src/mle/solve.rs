//! Damped Newton for `0.5 (o - m)^T H (o - m) + barrier(o)`.

use crate::error::{domain, Error, Result};
use crate::linalg::{max_abs, Matrix, SpdFactor, Vector};

use super::barrier::BarrierSpec;
use super::implied::ImpliedParams;

pub const MAX_NEWTON_ITER: usize = 200;
pub const STATIONARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub o: Vector,
    /// Objective value at `o`.
    pub value: f64,
    /// Sup-norm of the objective gradient at `o`.
    pub residual: f64,
    pub iterations: usize,
}

/// Minimizes the barrier-penalized Gaussian objective with precision `prec`
/// and center `center`, starting from a strictly feasible `init`.
pub fn minimize_barrier_quadratic(
    prec: &Matrix,
    center: &Vector,
    spec: &BarrierSpec,
    init: &Vector,
) -> Result<BarrierSolution> {
    let k = spec.dim();
    if prec.shape() != (k, k) || center.len() != k {
        return Err(domain("barrier program: inconsistent shapes"));
    }
    if !spec.is_feasible(init) {
        return Err(domain("barrier program: initial point is not strictly feasible"));
    }
    let objective = |o: &Vector| -> Option<f64> {
        let d = o - center;
        spec.value(o).ok().map(|b| 0.5 * d.dot(&(prec * &d)) + b)
    };
    let mut o = init.clone();
    let mut value = objective(&o).expect("feasible start");
    let mut residual = f64::INFINITY;
    for it in 0..MAX_NEWTON_ITER {
        let eval = spec.eval(&o)?;
        let quad = prec * (&o - center);
        let grad = &quad + &eval.gradient;
        residual = max_abs(&grad);
        let scale = max_abs(&quad).max(max_abs(&eval.gradient)).max(1.0);
        if residual < STATIONARITY_TOL {
            return Ok(BarrierSolution { o, value, residual, iterations: it });
        }
        let hess = prec + &eval.hessian;
        let step = -SpdFactor::new(&hess, "barrier Hessian")?.solve_vec(&grad);
        let decrement = -grad.dot(&step);
        if decrement < 1e-24 * scale * scale || max_abs(&step) < 1e-15 * max_abs(&o).max(1.0) {
            // Roundoff floor: accept when the residual is small relative to
            // the size of the terms that cancel.
            if residual < STATIONARITY_TOL * scale {
                return Ok(BarrierSolution { o, value, residual, iterations: it });
            }
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..100 {
            let trial = &o + &step * t;
            if let Some(v) = objective(&trial) {
                // Near the optimum objective differences drown in roundoff, so
                // a full feasible step is taken once the decrement is tiny.
                if v <= value - 0.25 * t * decrement || decrement < 1e-12 * value.abs().max(1.0) {
                    accepted = Some((trial, v));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, v)) => {
                o = trial;
                value = v;
            }
            None => break,
        }
    }
    let final_grad = prec * (&o - center) + spec.eval(&o)?.gradient;
    residual = residual.min(max_abs(&final_grad));
    Err(Error::NotConverged {
        solver: "barrier Newton",
        iterations: MAX_NEWTON_ITER,
        residual,
    })
}

/// The barrier program at the observed target: center `A beta_hat + b`,
/// precision `sigma_bar^{-1}`.
pub fn solve_barrier(
    ip: &ImpliedParams,
    beta_hat: &Vector,
    spec: &BarrierSpec,
    init: &Vector,
) -> Result<BarrierSolution> {
    minimize_barrier_quadratic(&ip.sigma_bar_inv, &ip.mean(beta_hat), spec, init)
}
