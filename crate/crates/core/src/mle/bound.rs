//! Monte-Carlo check of the conditional mean-squared-error bound for the
//! approximate selective MLE.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::linalg::{min_eigenvalue, spd_inverse, Matrix, Vector};
use crate::rng;

use super::barrier::BarrierSpec;
use super::estimate::inner_optimum;
use super::implied::{Canonical, ImpliedParams};
use super::solve::solve_barrier;

const BATCH: usize = 250;

/// `(squared error, bound term)` per accepted draw, and the attempts used.
type Batch = (Vec<(f64, f64)>, u64);
const ATTEMPTS_PER_BATCH: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MvBoundReport {
    /// Monte-Carlo estimate of `E[|mle - theta|^2 | selection]`.
    pub mse: f64,
    pub mse_se: f64,
    /// Monte-Carlo estimate of `E[|beta_hat - grad alpha|^2 | selection] / B`.
    pub bound: f64,
    pub bound_se: f64,
    /// `B = (eta0 eta1)^2`.
    pub strong_convexity: f64,
    pub eta0: f64,
    pub eta1: f64,
    /// Draws where the squared error exceeded its bound term.
    pub pointwise_violations: usize,
    pub accepted: usize,
    pub attempts: u64,
    pub holds: bool,
}

/// Draws `beta_hat ~ N(theta, C)` and `O1 | beta_hat ~ N(A beta_hat + b,
/// sigma_bar)`, keeps draws with `U O1 < v`, and compares the MLE error with
/// the bound. Everything is measured in the canonical parametrization
/// `(theta, C)` of `breve` (see [`Canonical`]), where the model is untilted.
pub fn mse_bound_check_mv(
    ip: &ImpliedParams,
    cov: &Matrix,
    spec: &BarrierSpec,
    breve: &Vector,
    init: &Vector,
    reps: usize,
    seed: u64,
) -> Result<MvBoundReport> {
    if reps < 2 {
        return Err(domain("bound check needs at least two replications"));
    }
    let (grad_alpha, _) = inner_optimum(breve, cov, ip, spec, init)?;
    let canon = Canonical::new(cov, &[ip])?;
    let theta = canon.theta(breve);
    let (cov, prec) = (&canon.cov, &canon.prec);
    let curvature = prec + ip.a.transpose() * &ip.sigma_bar_inv * &ip.a;
    let eta0 = min_eigenvalue(&spd_inverse(&curvature, "inner curvature")?);
    let eta1 = min_eigenvalue(prec);
    let strong_convexity = (eta0 * eta1).powi(2);

    let chol_t = nalgebra::Cholesky::new(cov.clone())
        .ok_or_else(|| Error::Singular("target covariance".into()))?
        .l();
    let chol_o = nalgebra::Cholesky::new(ip.sigma_bar.clone())
        .ok_or_else(|| Error::Singular("sigma_bar".into()))?
        .l();
    let d = theta.len();
    let k = ip.active_dim();
    let batches = reps.div_ceil(BATCH);
    let parts: Vec<Result<Batch>> = (0..batches)
        .into_par_iter()
        .map(|bi| {
            let want = BATCH.min(reps - bi * BATCH);
            let mut g = rng::stream(seed, bi as u64);
            let mut out = Vec::with_capacity(want);
            let mut attempts = 0u64;
            while out.len() < want {
                if attempts >= ATTEMPTS_PER_BATCH {
                    return Err(Error::DegenerateSelection { attempts });
                }
                attempts += 1;
                let beta_hat = &theta + &chol_t * rng::std_normal_vec(&mut g, d);
                let o = ip.mean(&beta_hat) + &chol_o * rng::std_normal_vec(&mut g, k);
                if !spec.is_feasible(&o) {
                    continue;
                }
                let sol = solve_barrier(ip, &beta_hat, spec, &o)?;
                let mle = &beta_hat + cov * (ip.a.transpose() * (&ip.sigma_bar_inv * (ip.mean(&beta_hat) - &sol.o)));
                let err = (mle - &theta).norm_squared();
                let term = (&beta_hat - &grad_alpha).norm_squared() / strong_convexity;
                out.push((err, term));
            }
            Ok((out, attempts))
        })
        .collect();
    let mut errs = Vec::with_capacity(reps);
    let mut terms = Vec::with_capacity(reps);
    let mut attempts = 0;
    for part in parts {
        let (pairs, tried) = part?;
        attempts += tried;
        for (e, t) in pairs {
            errs.push(e);
            terms.push(t);
        }
    }
    let (mse, mse_se) = crate::stats::mean_se(&errs);
    let (bound, bound_se) = crate::stats::mean_se(&terms);
    let pointwise_violations = errs
        .iter()
        .zip(&terms)
        .filter(|(e, t)| **e > **t * (1.0 + 1e-8) + 1e-12)
        .count();
    Ok(MvBoundReport {
        mse,
        mse_se,
        bound,
        bound_se,
        strong_convexity,
        eta0,
        eta1,
        pointwise_violations,
        accepted: reps,
        attempts,
        holds: mse <= bound + 3.0 * mse_se,
    })
}
