//! Inferential targets: linear statistics `beta_hat = L y` of the response.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{select_columns, select_rows, symmetrize, Matrix, SpdFactor, Vector};

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Coefficients of the regression of the mean on `X_E`.
    Partial,
    /// Coordinates `E` of the full-model regression coefficients.
    Full,
}

impl std::str::FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "partial" => Ok(Self::Partial),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown target kind '{other}' (expected partial or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    pub kind: TargetKind,
    /// Selected variables the target refers to.
    pub active: Vec<usize>,
    pub beta_hat: Vector,
    /// Covariance `sigma2 L L^T`.
    pub cov: Matrix,
    /// `d x n` map with `beta_hat = L y`.
    pub l_map: Matrix,
    pub sigma2: f64,
}

impl TargetModel {
    pub fn dim(&self) -> usize {
        self.beta_hat.len()
    }

    /// The estimand `L mu` for a mean response `mu`.
    pub fn estimand(&self, mean: &Vector) -> Vector {
        &self.l_map * mean
    }

    /// Naive Wald intervals ignoring selection.
    pub fn naive_intervals(&self, level: f64) -> Result<Vec<(f64, f64)>> {
        let z = crate::normal::two_sided_z(level)?;
        Ok((0..self.dim())
            .map(|j| {
                let half = z * self.cov[(j, j)].sqrt();
                (self.beta_hat[j] - half, self.beta_hat[j] + half)
            })
            .collect())
    }
}

pub fn build_target(data: &Dataset, active: &[usize], kind: TargetKind) -> Result<TargetModel> {
    if active.is_empty() {
        return Err(domain("target needs a nonempty selection"));
    }
    if active.iter().any(|&j| j >= data.p()) {
        return Err(domain("selected index out of range"));
    }
    if active.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("selected indices must be strictly increasing"));
    }
    let l_map = match kind {
        TargetKind::Partial => {
            let xe = select_columns(&data.x, active);
            let gram = xe.transpose() * &xe;
            SpdFactor::new(&gram, "X_E^T X_E")?.solve(&xe.transpose())
        }
        TargetKind::Full => {
            if data.n() < data.p() {
                return Err(domain(format!(
                    "full target needs n >= p (n={}, p={})",
                    data.n(),
                    data.p()
                )));
            }
            let gram = data.x.transpose() * &data.x;
            let all = SpdFactor::new(&gram, "X^T X")?.solve(&data.x.transpose());
            select_rows(&all, active)
        }
    };
    let cov = symmetrize(&(&l_map * l_map.transpose() * data.sigma2));
    SpdFactor::new(&cov, "target covariance")?;
    Ok(TargetModel {
        kind,
        active: active.to_vec(),
        beta_hat: &l_map * &data.y,
        cov,
        l_map,
        sigma2: data.sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_design_gives_scaled_identity() {
        let data = Dataset::new(Matrix::identity(4, 3), Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), 2.0)
            .unwrap();
        for kind in [TargetKind::Partial, TargetKind::Full] {
            let t = build_target(&data, &[0, 2], kind).unwrap();
            assert!((&t.cov - Matrix::identity(2, 2) * 2.0).amax() < 1e-14);
            assert_eq!(t.beta_hat.as_slice(), &[1.0, 3.0]);
        }
    }

    #[test]
    fn full_target_requires_enough_rows() {
        let data = Dataset::new(Matrix::identity(2, 2).resize(2, 3, 1.0), Vector::zeros(2), 1.0).unwrap();
        assert!(build_target(&data, &[0], TargetKind::Full).is_err());
        assert!(build_target(&data, &[], TargetKind::Partial).is_err());
    }
}
