//! Joint inner minimization over `(beta', o^(1), ..., o^(L))` of
//! `0.5 |beta' - theta|^2_{C^{-1}} + sum_l [0.5 |o_l - A_l beta' - b_l|^2_{Sb_l^{-1}} + B_l(o_l)]`,
//! with `(theta, C)` the canonical form of the target after all queries' tilts.

use crate::error::{domain, Error, Result};
use crate::linalg::{max_abs, Matrix, SpdFactor, Vector};

use super::barrier::BarrierSpec;
use super::implied::{Canonical, ImpliedParams};
use super::solve::{MAX_NEWTON_ITER, STATIONARITY_TOL};

/// One query's contribution: implied parameters, constraints and a
/// strictly feasible starting point.
#[derive(Debug, Clone, Copy)]
pub struct QueryTerm<'a> {
    pub params: &'a ImpliedParams,
    pub spec: &'a BarrierSpec,
    pub init: &'a Vector,
}

#[derive(Debug, Clone)]
pub struct JointSolution {
    pub beta: Vector,
    pub o: Vec<Vector>,
    pub value: f64,
    pub residual: f64,
}

fn objective(breve: &Vector, prec: &Matrix, terms: &[QueryTerm], beta: &Vector, o: &[Vector]) -> Option<f64> {
    let d = beta - breve;
    let mut v = 0.5 * d.dot(&(prec * &d));
    for (t, ol) in terms.iter().zip(o) {
        let r = ol - t.params.mean(beta);
        v += 0.5 * r.dot(&(&t.params.sigma_bar_inv * &r)) + t.spec.value(ol).ok()?;
    }
    Some(v)
}

/// Canonical form of the target with every query's tilt absorbed.
fn canonical(cov: &Matrix, terms: &[QueryTerm]) -> Result<Canonical> {
    let params: Vec<&ImpliedParams> = terms.iter().map(|t| t.params).collect();
    Canonical::new(cov, &params)
}

/// Joint inner problem at natural parameter `breve`; `beta` in the solution
/// is the model-implied mean of the target.
pub fn joint_inner(breve: &Vector, cov: &Matrix, terms: &[QueryTerm]) -> Result<JointSolution> {
    let canon = canonical(cov, terms)?;
    joint_inner_canonical(&canon.theta(breve), &canon.prec, terms)
}

fn joint_inner_canonical(breve: &Vector, prec: &Matrix, terms: &[QueryTerm]) -> Result<JointSolution> {
    let d = breve.len();
    let prec = prec.clone();
    let sizes: Vec<usize> = terms.iter().map(|t| t.spec.dim()).collect();
    let total = d + sizes.iter().sum::<usize>();
    for t in terms {
        if !t.spec.is_feasible(t.init) {
            return Err(domain("joint inner problem: infeasible starting point"));
        }
    }
    let mut beta = breve.clone();
    let mut o: Vec<Vector> = terms.iter().map(|t| t.init.clone()).collect();
    let mut value = objective(breve, &prec, terms, &beta, &o).expect("feasible start");
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITER {
        let mut grad = Vector::zeros(total);
        let mut hess = Matrix::zeros(total, total);
        let mut scale: f64 = 1.0;
        let db = &prec * (&beta - breve);
        scale = scale.max(max_abs(&db));
        grad.rows_mut(0, d).copy_from(&db);
        hess.view_mut((0, 0), (d, d)).copy_from(&prec);
        let mut off = d;
        for (t, ol) in terms.iter().zip(&o) {
            let k = t.spec.dim();
            let ip = t.params;
            let r = &ip.sigma_bar_inv * (ol - ip.mean(&beta));
            let eval = t.spec.eval(ol)?;
            scale = scale.max(max_abs(&r)).max(max_abs(&eval.gradient));
            let gb = -(ip.a.transpose() * &r);
            let mut top = grad.rows_mut(0, d);
            top += gb;
            grad.rows_mut(off, k).copy_from(&(&r + &eval.gradient));
            let sa = &ip.sigma_bar_inv * &ip.a;
            let mut hbb = hess.view_mut((0, 0), (d, d));
            hbb += ip.a.transpose() * &sa;
            hess.view_mut((off, 0), (k, d)).copy_from(&(-&sa));
            hess.view_mut((0, off), (d, k)).copy_from(&(-sa.transpose()));
            hess.view_mut((off, off), (k, k)).copy_from(&(&ip.sigma_bar_inv + &eval.hessian));
            off += k;
        }
        residual = max_abs(&grad);
        if residual < STATIONARITY_TOL {
            return Ok(JointSolution { beta, o, value, residual });
        }
        let step = -SpdFactor::new(&hess, "joint Hessian")?.solve_vec(&grad);
        let decrement = -grad.dot(&step);
        if decrement < 1e-24 * scale * scale && residual < STATIONARITY_TOL * scale {
            return Ok(JointSolution { beta, o, value, residual });
        }
        let split = |x: &Vector| -> (Vector, Vec<Vector>) {
            let b = x.rows(0, d).into_owned();
            let mut parts = Vec::with_capacity(sizes.len());
            let mut off = d;
            for &k in &sizes {
                parts.push(x.rows(off, k).into_owned());
                off += k;
            }
            (b, parts)
        };
        let (sb, so) = split(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..100 {
            let nb = &beta + &sb * t;
            let no: Vec<Vector> = o.iter().zip(&so).map(|(a, s)| a + s * t).collect();
            if let Some(v) = objective(breve, &prec, terms, &nb, &no) {
                if v <= value - 0.25 * t * decrement || decrement < 1e-12 * value.abs().max(1.0) {
                    beta = nb;
                    o = no;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NotConverged {
        solver: "joint barrier Newton",
        iterations: MAX_NEWTON_ITER,
        residual,
    })
}

/// Barrier approximate log-likelihood after several queries, up to a constant.
pub fn joint_approx_loglik(beta_hat: &Vector, breve: &Vector, cov: &Matrix, terms: &[QueryTerm]) -> Result<f64> {
    let canon = canonical(cov, terms)?;
    let theta = canon.theta(breve);
    let sol = joint_inner_canonical(&theta, &canon.prec, terms)?;
    let diff = beta_hat - &theta;
    Ok(-0.5 * diff.dot(&(&canon.prec * &diff)) + sol.value)
}
