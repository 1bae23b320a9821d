//! Approximate selective MLE, observed Fisher information and Wald inference.

use crate::error::{domain, Error, Result};
use crate::linalg::{spd_inverse, symmetrize, Matrix, SpdFactor, Vector};
use crate::normal;
use crate::queries::{KktAffine, TargetModel};

use super::barrier::BarrierSpec;
use super::implied::{implied_params, Canonical, ImpliedParams};
use super::solve::{minimize_barrier_quadratic, solve_barrier, BarrierSolution};

/// `beta_hat + Sigma_S [A^T sigma_bar^{-1} (A beta_hat + b - o_star) + T beta_hat + c]`.
pub fn selective_mle(beta_hat: &Vector, cov: &Matrix, ip: &ImpliedParams, o_star: &Vector) -> Vector {
    beta_hat + cov * score_shift(beta_hat, ip, o_star)
}

/// One query's contribution to `Sigma_S^{-1} (mle - beta_hat)`.
pub(crate) fn score_shift(beta_hat: &Vector, ip: &ImpliedParams, o_star: &Vector) -> Vector {
    ip.a.transpose() * (&ip.sigma_bar_inv * (ip.mean(beta_hat) - o_star)) + &ip.tilt * beta_hat + &ip.tilt_offset
}

/// Observed information and its inverse at the barrier optimum.
#[derive(Debug, Clone)]
pub struct FisherInfo {
    pub info: Matrix,
    pub inverse: Matrix,
}

/// `Sigma^{-1} M^{-1} Sigma^{-1}` with
/// `M = Sigma^{-1} + T + A^T Sb^{-1} A - A^T Sb^{-1} (Sb^{-1} + H)^{-1} Sb^{-1} A`
/// and `H` the barrier Hessian at `o_star`.
pub fn fisher_info(ip: &ImpliedParams, cov: &Matrix, o_star: &Vector, spec: &BarrierSpec) -> Result<FisherInfo> {
    let hess = spec.eval(o_star)?.hessian;
    let prec = spd_inverse(cov, "target covariance")?;
    let m = schur_complement(&prec, &[(ip, &hess)])?;
    let inverse = symmetrize(&(cov * &m * cov));
    let info = symmetrize(&(&prec * spd_inverse(&m, "likelihood curvature")? * &prec));
    check_pd(&info, "Fisher information")?;
    Ok(FisherInfo { info, inverse })
}

/// Curvature of the profiled joint objective, one term per query.
pub(crate) fn schur_complement(prec: &Matrix, terms: &[(&ImpliedParams, &Matrix)]) -> Result<Matrix> {
    let mut m = prec.clone();
    for (ip, hess) in terms {
        let sa = &ip.sigma_bar_inv * &ip.a;
        let inner = SpdFactor::new(&(&ip.sigma_bar_inv + *hess), "barrier Hessian")?;
        m += ip.a.transpose() * &sa - sa.transpose() * inner.solve(&sa) + &ip.tilt;
    }
    Ok(symmetrize(&m))
}

fn check_pd(m: &Matrix, what: &str) -> Result<()> {
    let min = crate::linalg::min_eigenvalue(m);
    let max = crate::linalg::max_eigenvalue(m);
    if !(min > 0.0) {
        return Err(Error::Numerical(format!(
            "{what} lost positive definiteness (eigenvalues in [{min:e}, {max:e}])"
        )));
    }
    Ok(())
}

/// Barrier version of the approximate log-likelihood at `breve`, up to a
/// constant. In the canonical parametrization (see [`Canonical`]) it reads
/// `-0.5 |beta_hat - theta|^2_{C^{-1}} + min_o {0.5 |o - A theta - b|^2_{G^{-1}} + B(o)}`
/// with `G = sigma_bar + A C A^T`.
pub fn approx_loglik(
    beta_hat: &Vector,
    breve: &Vector,
    cov: &Matrix,
    ip: &ImpliedParams,
    spec: &BarrierSpec,
    init: &Vector,
) -> Result<f64> {
    let canon = Canonical::new(cov, &[ip])?;
    let theta = canon.theta(breve);
    let diff = beta_hat - &theta;
    let quad = diff.dot(&(&canon.prec * &diff));
    Ok(-0.5 * quad + profiled_selection(&theta, &canon.cov, ip, spec, init)?.value)
}

/// Inner minimization with the target variable profiled out, at canonical
/// mean `theta` and canonical covariance `cov`.
pub fn profiled_selection(
    theta: &Vector,
    cov: &Matrix,
    ip: &ImpliedParams,
    spec: &BarrierSpec,
    init: &Vector,
) -> Result<BarrierSolution> {
    let gamma = &ip.sigma_bar + &ip.a * cov * ip.a.transpose();
    let prec = spd_inverse(&gamma, "marginal covariance of O1")?;
    minimize_barrier_quadratic(&prec, &ip.mean(theta), spec, init)
}

/// The joint minimizer `(beta', o)` of the inner problem at `breve`; `beta'`
/// is the model-implied mean of the target under the approximation.
pub fn inner_optimum(
    breve: &Vector,
    cov: &Matrix,
    ip: &ImpliedParams,
    spec: &BarrierSpec,
    init: &Vector,
) -> Result<(Vector, Vector)> {
    let canon = Canonical::new(cov, &[ip])?;
    let theta = canon.theta(breve);
    let sol = profiled_selection(&theta, &canon.cov, ip, spec, init)?;
    let lhs = &canon.prec + ip.a.transpose() * &ip.sigma_bar_inv * &ip.a;
    let rhs = &canon.prec * &theta + ip.a.transpose() * (&ip.sigma_bar_inv * (&sol.o - &ip.b));
    let beta = SpdFactor::new(&lhs, "inner curvature")?.solve_vec(&rhs);
    Ok((beta, sol.o))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MleDiagnostics {
    pub barrier_iterations: usize,
    pub barrier_residual: f64,
    pub o1_star: Vector,
}

/// Point estimates, standard errors, p-values and intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub active: Vec<usize>,
    pub mle: Vector,
    pub info_inverse: Matrix,
    pub std_errors: Vector,
    pub pvalues: Vector,
    pub intervals: Vec<(f64, f64)>,
    /// The `q` in a level `1 - q` interval.
    pub level: f64,
    pub diagnostics: MleDiagnostics,
}

impl MleResult {
    /// Wald quantities: `p_j = 2 min(sf(m/s), cdf(m/s))`, intervals
    /// `m +/- z_{1-q/2} s` with `s_j = sqrt(I^{-1}_jj)`.
    pub fn from_estimate(active: Vec<usize>, mle: Vector, info_inverse: Matrix, level: f64) -> Result<Self> {
        let z = normal::two_sided_z(level)?;
        let d = mle.len();
        if info_inverse.shape() != (d, d) || active.len() != d {
            return Err(domain("estimate and information have inconsistent shapes"));
        }
        let std_errors = info_inverse.diagonal().map(f64::sqrt);
        if std_errors.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Numerical("non-positive variance in inverse information".into()));
        }
        let pvalues = Vector::from_fn(d, |j, _| normal::two_sided_pvalue(mle[j] / std_errors[j]));
        let intervals = (0..d)
            .map(|j| (mle[j] - z * std_errors[j], mle[j] + z * std_errors[j]))
            .collect();
        Ok(Self {
            active,
            mle,
            info_inverse,
            std_errors,
            pvalues,
            intervals,
            level,
            diagnostics: MleDiagnostics::default(),
        })
    }

    /// Result for an empty selection.
    pub fn empty(level: f64) -> Self {
        Self {
            active: Vec::new(),
            mle: Vector::zeros(0),
            info_inverse: Matrix::zeros(0, 0),
            std_errors: Vector::zeros(0),
            pvalues: Vector::zeros(0),
            intervals: Vec::new(),
            level,
            diagnostics: MleDiagnostics::default(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mle.len()
    }

    /// Indices (into `active`) whose interval excludes zero.
    pub fn detections(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&j| self.intervals[j].0 > 0.0 || self.intervals[j].1 < 0.0)
            .collect()
    }
}

/// Single-query pipeline: implied parameters, barrier solve, MLE, information.
pub fn infer(target: &TargetModel, kkt: &KktAffine, cov_w: &Matrix, level: f64) -> Result<MleResult> {
    normal::two_sided_z(level)?;
    if target.dim() != kkt.target_dim() {
        return Err(domain("target and KKT map have different dimensions"));
    }
    let ip = implied_params(kkt, cov_w)?;
    let sol = solve_barrier(&ip, &target.beta_hat, &kkt.barrier, &kkt.o1)?;
    let mle = selective_mle(&target.beta_hat, &target.cov, &ip, &sol.o);
    let fi = fisher_info(&ip, &target.cov, &sol.o, &kkt.barrier)?;
    let mut out = MleResult::from_estimate(target.active.clone(), mle, fi.inverse, level)?;
    out.diagnostics = MleDiagnostics {
        barrier_iterations: sol.iterations,
        barrier_residual: sol.residual,
        o1_star: sol.o,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_a(d: usize, k: usize) -> ImpliedParams {
        ImpliedParams::untilted(Matrix::identity(k, k), Matrix::zeros(k, d), Vector::from_element(k, 1.0)).unwrap()
    }

    #[test]
    fn zero_a_returns_target_and_naive_information() {
        let ip = zero_a(2, 2);
        let cov = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let beta = Vector::from_vec(vec![0.4, -1.0]);
        let spec = BarrierSpec::sign(&[1.0, 1.0]);
        let sol = solve_barrier(&ip, &beta, &spec, &Vector::from_element(2, 1.0)).unwrap();
        assert_eq!(selective_mle(&beta, &cov, &ip, &sol.o), beta);
        let fi = fisher_info(&ip, &cov, &sol.o, &spec).unwrap();
        assert!((fi.inverse - &cov).amax() < 1e-12);
    }

    #[test]
    fn wald_quantities() {
        let r = MleResult::from_estimate(
            vec![3, 7],
            Vector::from_vec(vec![0.0, 2.0]),
            Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 4.0])),
            0.10,
        )
        .unwrap();
        assert!((r.pvalues[0] - 1.0).abs() < 1e-15);
        let half = r.intervals[1].1 - r.mle[1];
        assert!((half - 1.6449 * 2.0).abs() < 2e-4);
        assert_eq!(r.detections(), Vec::<usize>::new());
    }
}
