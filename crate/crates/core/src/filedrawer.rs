//! Univariate "publish if significant" problem.
//!
//! We observe `Y ~ N(beta, 1)` only when `Y + W > tau` with independent
//! randomization `W ~ N(0, eta2)`. The selection-adjusted likelihood of `Y`
//! is a one-parameter exponential family with log-partition
//! `alpha(beta) = beta^2/2 + log Φ̄((tau - beta)/sqrt(1 + eta2))`, so the
//! selective MLE solves `alpha'(beta) = y` and the observed Fisher
//! information is `alpha''(beta_mle)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal;
use crate::rng::{self, Rng};

const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 100;
const BATCH: usize = 1000;
/// Attempt cap for every batch of `BATCH` accepted draws.
pub const ATTEMPTS_PER_BATCH: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileDrawerProblem {
    pub tau: f64,
    pub eta2: f64,
    pub q: Option<f64>,
}

/// `sqrt(1 + eta2) * z_{1-q}`.
///
/// `eta2 = 0` is accepted here and gives the non-randomized threshold.
pub fn threshold_from_level(q: f64, eta2: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("selection level q must lie in (0,1), got {q}")));
    }
    if !(eta2 >= 0.0) || !eta2.is_finite() {
        return Err(domain(format!("randomization variance must be >= 0, got {eta2}")));
    }
    Ok((1.0 + eta2).sqrt() * normal::quantile(1.0 - q)?)
}

impl FileDrawerProblem {
    pub fn new(tau: f64, eta2: f64) -> Result<Self> {
        if !(eta2 > 0.0) || !eta2.is_finite() {
            return Err(domain(format!("randomization variance must be positive, got {eta2}")));
        }
        if !tau.is_finite() {
            return Err(domain("threshold must be finite"));
        }
        Ok(Self { tau, eta2, q: None })
    }

    pub fn from_level(q: f64, eta2: f64) -> Result<Self> {
        let tau = threshold_from_level(q, eta2)?;
        let mut prob = Self::new(tau, eta2)?;
        prob.q = Some(q);
        Ok(prob)
    }

    /// Marginal standard deviation of `Y + W`.
    pub fn scale(&self) -> f64 {
        (1.0 + self.eta2).sqrt()
    }

    pub fn selection_probability(&self, beta: f64) -> f64 {
        normal::sf((self.tau - beta) / self.scale())
    }

    /// `alpha'(beta)`, the selected mean of `Y`.
    pub fn grad_alpha(&self, beta: f64) -> f64 {
        let s = self.scale();
        beta + normal::inv_mills((self.tau - beta) / s) / s
    }

    /// `alpha''(beta)`, the selected variance of `Y`.
    pub fn hess_alpha(&self, beta: f64) -> f64 {
        let s = self.scale();
        let u = (self.tau - beta) / s;
        let lam = normal::inv_mills(u);
        1.0 - lam * (lam - u) / (s * s)
    }

    /// Log density of `Y = y` given selection, as a function of `beta`.
    ///
    /// The `beta`-dependent part is `y*beta - beta^2/2 - log Φ̄((tau-beta)/s)`;
    /// the remaining terms make this the exact conditional log density.
    pub fn soft_trunc_loglik(&self, y: f64, beta: f64) -> f64 {
        let s = self.scale();
        let eta = self.eta2.sqrt();
        normal::log_pdf(y - beta) + normal::log_sf((self.tau - y) / eta)
            - normal::log_sf((self.tau - beta) / s)
    }

    /// Root of `alpha'(beta) = y` by safeguarded Newton inside a bisection bracket.
    pub fn solve_mle(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(domain("observation must be finite"));
        }
        let g = |b: f64| self.grad_alpha(b) - y;
        let width = 10.0 * self.scale();
        // alpha'(b) > b, so the root lies below y.
        let mut hi = y;
        let mut lo = y - width;
        let mut step = width;
        while g(lo) > 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if !lo.is_finite() {
                return Err(Error::NotConverged {
                    solver: "file-drawer MLE bracket",
                    iterations: 0,
                    residual: g(hi).abs(),
                });
            }
        }
        let mut x = y - normal::inv_mills((self.tau - y) / self.scale()) / self.scale();
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let mut residual = g(x);
        for _ in 0..MLE_MAX_ITER {
            if residual.abs() < MLE_TOL {
                return Ok(x);
            }
            if residual > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - residual / self.hess_alpha(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            residual = g(x);
        }
        if residual.abs() < MLE_TOL {
            return Ok(x);
        }
        Err(Error::NotConverged {
            solver: "file-drawer MLE",
            iterations: MLE_MAX_ITER,
            residual: residual.abs(),
        })
    }

    /// Observed Fisher information at `beta_mle`.
    pub fn fisher_info(&self, beta_mle: f64) -> f64 {
        self.hess_alpha(beta_mle)
    }

    pub fn fit(&self, y: f64) -> Result<FileDrawerFit> {
        let beta_mle = self.solve_mle(y)?;
        Ok(FileDrawerFit {
            y,
            beta_mle,
            fisher_info: self.fisher_info(beta_mle),
        })
    }

    /// One-sided pivot `Φ̄(sqrt(I) (beta_mle - beta))`.
    pub fn pivot(&self, y: f64, beta: f64) -> Result<f64> {
        Ok(self.fit(y)?.pivot_at(beta))
    }

    /// Unnormalized density of the selective MLE at `m` under parameter `beta`.
    pub fn exact_mle_density(&self, m: f64, beta: f64) -> f64 {
        let y = self.grad_alpha(m);
        let jac = self.hess_alpha(m).abs();
        jac * (-0.5 * (y - beta).powi(2)).exp() * normal::sf((self.tau - y) / self.eta2.sqrt())
    }

    /// Draws `count` values of `Y` conditional on `Y + W > tau` by rejection.
    ///
    /// Batches of `BATCH` accepted draws run on separate RNG streams; a batch
    /// that exhausts [`ATTEMPTS_PER_BATCH`] attempts aborts the whole call.
    pub fn sample_selected(&self, beta: f64, count: usize, seed: u64) -> Result<SelectedSample> {
        let batches = count.div_ceil(BATCH);
        let eta = self.eta2.sqrt();
        let parts: Vec<Result<(Vec<f64>, u64)>> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let want = BATCH.min(count - b * BATCH);
                let mut rng = rng::stream(seed, b as u64);
                draw_batch(&mut rng, beta, eta, self.tau, want)
            })
            .collect();
        let mut ys = Vec::with_capacity(count);
        let mut attempts = 0;
        for part in parts {
            let (batch, tried) = part?;
            attempts += tried;
            ys.extend(batch);
        }
        Ok(SelectedSample { ys, attempts })
    }

    /// Monte-Carlo check of the conditional-MSE bound
    /// `E[(mle - beta)^2 | sel] <= Var(Y | sel) * (1 + eta2)^2 / eta2^2`.
    pub fn mse_bound_check(&self, beta: f64, reps: usize, seed: u64) -> Result<MseBoundReport> {
        if reps < 1000 {
            return Err(domain(format!("mse_bound_check needs at least 1000 reps, got {reps}")));
        }
        let sample = self.sample_selected(beta, reps, seed)?;
        let mles: Vec<f64> = sample
            .ys
            .par_iter()
            .map(|&y| self.solve_mle(y))
            .collect::<Result<_>>()?;
        let sq_err: Vec<f64> = mles.iter().map(|m| (m - beta).powi(2)).collect();
        let (mse, mse_se) = crate::stats::mean_se(&sq_err);
        let mean_y = self.grad_alpha(beta);
        let var_y_mc = crate::stats::mean(
            &sample.ys.iter().map(|y| (y - mean_y).powi(2)).collect::<Vec<_>>(),
        );
        let strong_convexity = self.eta2.powi(2) / (1.0 + self.eta2).powi(2);
        let bound = self.hess_alpha(beta) / strong_convexity;
        let bound_mc = var_y_mc / strong_convexity;
        Ok(MseBoundReport {
            beta,
            mse,
            mse_se,
            bound,
            bound_mc,
            var_y_mc,
            accepted: reps,
            attempts: sample.attempts,
            holds: mse <= bound + 3.0 * mse_se,
        })
    }
}

fn draw_batch(rng: &mut Rng, beta: f64, eta: f64, tau: f64, want: usize) -> Result<(Vec<f64>, u64)> {
    let mut out = Vec::with_capacity(want);
    let mut attempts = 0u64;
    while out.len() < want {
        if attempts >= ATTEMPTS_PER_BATCH {
            return Err(Error::DegenerateSelection { attempts });
        }
        attempts += 1;
        let y = beta + rng::std_normal(rng);
        let w = eta * rng::std_normal(rng);
        if y + w > tau {
            out.push(y);
        }
    }
    Ok((out, attempts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSample {
    pub ys: Vec<f64>,
    pub attempts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileDrawerFit {
    pub y: f64,
    pub beta_mle: f64,
    pub fisher_info: f64,
}

impl FileDrawerFit {
    pub fn z_score(&self, beta: f64) -> f64 {
        self.fisher_info.sqrt() * (self.beta_mle - beta)
    }

    /// One-sided approximate pivot, uniform at the true `beta`.
    pub fn pivot_at(&self, beta: f64) -> f64 {
        normal::sf(self.z_score(beta))
    }

    /// Two-sided p-value for `H0: beta = beta0`.
    pub fn two_sided_pvalue(&self, beta0: f64) -> f64 {
        normal::two_sided_pvalue(self.z_score(beta0))
    }

    pub fn interval(&self, q: f64) -> Result<(f64, f64)> {
        let half = normal::two_sided_z(q)? / self.fisher_info.sqrt();
        Ok((self.beta_mle - half, self.beta_mle + half))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBoundReport {
    pub beta: f64,
    pub mse: f64,
    pub mse_se: f64,
    /// Bound evaluated with the exact selected variance `alpha''(beta)`.
    pub bound: f64,
    /// Same bound with the Monte-Carlo estimate of the selected variance.
    pub bound_mc: f64,
    pub var_y_mc: f64,
    pub accepted: usize,
    pub attempts: u64,
    pub holds: bool,
}
