//! Affine KKT maps `omega = P beta_hat + Q o1 + r` for solved queries.

use crate::error::{domain, Error, Result};
use crate::linalg::{max_abs, Matrix, SpdFactor, Vector};
use crate::mle::barrier::{BarrierKind, BarrierSpec};

use super::{Dataset, Penalty, SelectionOutcome, TargetModel};

#[derive(Debug, Clone)]
pub struct KktAffine {
    pub p_mat: Matrix,
    pub q_mat: Matrix,
    /// Observed remainder, including the part of the data independent of
    /// the target and the conditioned-on inactive variables.
    pub r: Vector,
    /// Constraints `U o1 < v` describing the selection event.
    pub barrier: BarrierSpec,
    /// Observed active optimization variables.
    pub o1: Vector,
    pub omega: Vector,
    /// Reconstruction residual at the observed data.
    pub residual: f64,
}

impl KktAffine {
    pub fn target_dim(&self) -> usize {
        self.p_mat.ncols()
    }

    pub fn active_dim(&self) -> usize {
        self.q_mat.ncols()
    }

    pub fn reconstruct(&self, beta_hat: &Vector) -> Vector {
        &self.p_mat * beta_hat + &self.q_mat * &self.o1 + &self.r
    }
}

/// Splits the data part `M y + t` of the KKT map into `P beta_hat + r`, where
/// `P = M cov_y L^T Sigma_S^{-1}` makes `r` uncorrelated with `beta_hat`.
/// `cov_y = None` means `sigma2 I`.
pub fn decompose_data_term(
    m: &Matrix,
    t: &Vector,
    target: &TargetModel,
    cov_y: Option<&Matrix>,
    y: &Vector,
) -> Result<(Matrix, Vector)> {
    let n = y.len();
    if m.ncols() != n || target.l_map.ncols() != n || t.len() != m.nrows() {
        return Err(domain("data-term decomposition inputs have inconsistent shapes"));
    }
    let cross = match cov_y {
        Some(c) => {
            if c.shape() != (n, n) {
                return Err(domain("response covariance has the wrong shape"));
            }
            m * c * target.l_map.transpose()
        }
        None => m * target.l_map.transpose() * target.sigma2,
    };
    let factor = SpdFactor::new(&target.cov, "target covariance")?;
    let p_mat = factor.solve(&cross.transpose()).transpose();
    let r = m * y + t - &p_mat * &target.beta_hat;
    Ok((p_mat, r))
}

fn finish(
    data: &Dataset,
    outcome: &SelectionOutcome,
    target: &TargetModel,
    q_mat: Matrix,
    t: Vector,
    barrier: BarrierSpec,
) -> Result<KktAffine> {
    let m = -data.x.transpose();
    let (p_mat, r) = decompose_data_term(&m, &t, target, None, &data.y)?;
    let mut kkt = KktAffine {
        p_mat,
        q_mat,
        r,
        barrier,
        o1: outcome.o1.clone(),
        omega: outcome.omega.clone(),
        residual: 0.0,
    };
    let scale = max_abs(&(&m * &data.y)).max(1.0);
    let residual = max_abs(&(kkt.reconstruct(&target.beta_hat) - &outcome.omega));
    let tolerance = 1e-8 * scale;
    if !(residual < tolerance) {
        return Err(Error::Inconsistent { residual, tolerance });
    }
    if !kkt.barrier.is_feasible(&kkt.o1) {
        return Err(Error::Inconsistent {
            residual: kkt.barrier.slacks(&kkt.o1).min(),
            tolerance: 0.0,
        });
    }
    kkt.residual = residual;
    Ok(kkt)
}

fn sign_matrix_columns(x: &Matrix, active: &[usize]) -> Matrix {
    Matrix::from_fn(x.ncols(), active.len(), |i, k| if i == active[k] { 1.0 } else { 0.0 })
}

/// Randomized lasso: `Q = X^T X_E + eps I_{., E}`, `t` the full subgradient.
pub fn lasso_kkt(data: &Dataset, outcome: &SelectionOutcome, target: &TargetModel) -> Result<KktAffine> {
    let Penalty::Lasso { epsilon, .. } = outcome.penalty else {
        return Err(domain("lasso_kkt needs a lasso outcome"));
    };
    let xe = crate::linalg::select_columns(&data.x, &outcome.active);
    let q_mat = data.x.transpose() * xe + sign_matrix_columns(&data.x, &outcome.active) * epsilon;
    let barrier = BarrierSpec::sign(&outcome.signs);
    finish(data, outcome, target, q_mat, outcome.subgradient.clone(), barrier)
}

/// Marginal screening: `Q = I_{., E}`, `t` the clipped statistic.
pub fn ms_kkt(data: &Dataset, outcome: &SelectionOutcome, target: &TargetModel) -> Result<KktAffine> {
    if !matches!(outcome.penalty, Penalty::Screening { .. }) {
        return Err(domain("ms_kkt needs a screening outcome"));
    }
    let q_mat = sign_matrix_columns(&data.x, &outcome.active);
    let barrier = BarrierSpec::sign(&outcome.signs);
    finish(data, outcome, target, q_mat, outcome.solution.clone(), barrier)
}

/// SLOPE: one column `X^T Xbar_k` per cluster, sign and ordering constraints.
pub fn slope_kkt(data: &Dataset, outcome: &SelectionOutcome, target: &TargetModel) -> Result<KktAffine> {
    if !matches!(outcome.penalty, Penalty::Slope { .. }) {
        return Err(domain("slope_kkt needs a SLOPE outcome"));
    }
    let p = data.p();
    let k = outcome.clusters.len();
    let lead: Vec<f64> = outcome.o1.iter().map(|v| v.signum()).collect();
    let mut dir = Matrix::zeros(p, k);
    for (c, group) in outcome.clusters.iter().enumerate() {
        for &j in group {
            dir[(j, c)] = outcome.solution[j].signum() * lead[c];
        }
    }
    let q_mat = data.x.transpose() * (&data.x * dir);
    let mut u = Matrix::zeros(2 * k - 1, k);
    for c in 0..k {
        u[(c, c)] = -lead[c];
    }
    for c in 0..k - 1 {
        u[(k + c, c)] = -lead[c];
        u[(k + c, c + 1)] = lead[c + 1];
    }
    let barrier = BarrierSpec::new(u, Vector::zeros(2 * k - 1), BarrierKind::GeneralAffine)?;
    finish(data, outcome, target, q_mat, outcome.subgradient.clone(), barrier)
}

/// Dispatches on the query kind.
pub fn kkt(data: &Dataset, outcome: &SelectionOutcome, target: &TargetModel) -> Result<KktAffine> {
    match outcome.penalty {
        Penalty::Lasso { .. } => lasso_kkt(data, outcome, target),
        Penalty::Screening { .. } => ms_kkt(data, outcome, target),
        Penalty::Slope { .. } => slope_kkt(data, outcome, target),
    }
}
