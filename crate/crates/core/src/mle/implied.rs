//! Gaussian regression of the active optimization variables on the target.

use crate::error::{domain, Error, Result};
use crate::linalg::{max_eigenvalue, min_eigenvalue, spd_inverse, symmetrize, Matrix, SpdFactor, Vector};
use crate::queries::KktAffine;

/// `O1 | beta_hat ~ N(A beta_hat + b, sigma_bar)` before selection.
///
/// The randomization density also leaves a factor
/// `exp(-0.5 (P beta_hat + r)' Pi (P beta_hat + r))` that does not involve
/// `O1`, where `Pi = S^{-1} - S^{-1} Q sigma_bar Q' S^{-1}` annihilates the
/// range of `Q`. It tilts the selection-free law of the target and is kept
/// as `tilt = P' Pi P` and `tilt_offset = P' Pi r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedParams {
    pub sigma_bar: Matrix,
    pub sigma_bar_inv: Matrix,
    pub a: Matrix,
    pub b: Vector,
    pub tilt: Matrix,
    pub tilt_offset: Vector,
}

impl ImpliedParams {
    pub fn target_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn active_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Conditional mean `A beta + b`.
    pub fn mean(&self, beta: &Vector) -> Vector {
        &self.a * beta + &self.b
    }

    /// Parameters with no tilt.
    pub fn untilted(sigma_bar: Matrix, a: Matrix, b: Vector) -> Result<Self> {
        let sigma_bar_inv = SpdFactor::new(&sigma_bar, "sigma_bar")?.inverse();
        let d = a.ncols();
        Ok(Self {
            sigma_bar,
            sigma_bar_inv,
            a,
            b,
            tilt: Matrix::zeros(d, d),
            tilt_offset: Vector::zeros(d),
        })
    }
}

/// The target's selection-free law after absorbing the tilts of one or more
/// queries: `beta_hat ~ N(theta, cov)` with `cov^{-1} = Sigma^{-1} + sum T_l`
/// and `theta = cov (Sigma^{-1} beta - sum c_l)`. In `theta` the model has
/// the untilted form, so the barrier machinery applies unchanged.
#[derive(Debug, Clone)]
pub struct Canonical {
    pub cov: Matrix,
    pub prec: Matrix,
    natural_prec: Matrix,
    offset: Vector,
}

impl Canonical {
    pub fn new(cov: &Matrix, params: &[&ImpliedParams]) -> Result<Self> {
        let natural_prec = spd_inverse(cov, "target covariance")?;
        let d = cov.nrows();
        let mut prec = natural_prec.clone();
        let mut offset = Vector::zeros(d);
        for ip in params {
            if ip.target_dim() != d {
                return Err(domain("implied parameters and target have different dimensions"));
            }
            prec += &ip.tilt;
            offset += &ip.tilt_offset;
        }
        let prec = symmetrize(&prec);
        let cov = SpdFactor::new(&prec, "tilted target precision")?.inverse();
        Ok(Self {
            cov,
            prec,
            natural_prec,
            offset,
        })
    }

    /// Canonical mean `theta` at natural parameter `beta`.
    pub fn theta(&self, beta: &Vector) -> Vector {
        &self.cov * (&self.natural_prec * beta - &self.offset)
    }

    /// Natural parameter at canonical mean `theta`.
    pub fn beta(&self, theta: &Vector) -> Vector {
        SpdFactor::new(&self.natural_prec, "target precision")
            .expect("validated in new")
            .solve_vec(&(&self.prec * theta + &self.offset))
    }
}

pub fn implied_params(kkt: &KktAffine, cov_w: &Matrix) -> Result<ImpliedParams> {
    implied_from_parts(&kkt.p_mat, &kkt.q_mat, &kkt.r, cov_w)
}

/// `sigma_bar^{-1} = Q^T S^{-1} Q`, `A = -sigma_bar Q^T S^{-1} P`,
/// `b = -sigma_bar Q^T S^{-1} r` with `S` the randomization covariance;
/// `T = P' S^{-1} P - A' sigma_bar^{-1} A`, `c = P' S^{-1} r - A' sigma_bar^{-1} b`.
pub fn implied_from_parts(p_mat: &Matrix, q_mat: &Matrix, r: &Vector, cov_w: &Matrix) -> Result<ImpliedParams> {
    let p = q_mat.nrows();
    if p_mat.nrows() != p || r.len() != p || cov_w.shape() != (p, p) {
        return Err(domain("implied parameters: inconsistent shapes"));
    }
    let w = SpdFactor::new(cov_w, "randomization covariance")?;
    let wq = w.solve(q_mat);
    let wp = w.solve(p_mat);
    let prec = symmetrize(&(q_mat.transpose() * &wq));
    if !(min_eigenvalue(&prec) > 1e-12 * max_eigenvalue(&prec)) {
        return Err(Error::Singular("Q must have full column rank".into()));
    }
    let factor = SpdFactor::new(&prec, "Q^T S^{-1} Q")?;
    let a = -factor.solve(&(wq.transpose() * p_mat));
    let b = -factor.solve_vec(&(wq.transpose() * r));
    let sa = &prec * &a;
    let tilt = symmetrize(&(p_mat.transpose() * &wp - a.transpose() * &sa));
    let tilt_offset = wp.transpose() * r - sa.transpose() * &b;
    Ok(ImpliedParams {
        sigma_bar: factor.inverse(),
        sigma_bar_inv: prec,
        a,
        b,
        tilt,
        tilt_offset,
    })
}
