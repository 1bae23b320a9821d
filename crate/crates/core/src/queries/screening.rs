//! Randomized marginal screening.

use crate::error::{domain, Error, Result};
use crate::linalg::{select_entries, Vector};
use crate::normal;

use super::{complement, Dataset, Penalty, RandomizationSpec, SelectionOutcome};

/// Per-coordinate thresholds `z_{1-alpha/2} * sqrt(sigma2 ||X_j||^2 + Var(W_j))`.
pub fn screening_thresholds(data: &Dataset, rand_var: &Vector, alpha: f64) -> Result<Vector> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if rand_var.len() != data.p() {
        return Err(domain("randomization dimension differs from number of columns"));
    }
    let z = normal::two_sided_z(alpha)?;
    Ok(Vector::from_fn(data.p(), |j, _| {
        z * (data.sigma2 * data.x.column(j).norm_squared() + rand_var[j]).sqrt()
    }))
}

pub fn solve_marginal_screening(
    data: &Dataset,
    rand: &RandomizationSpec,
    alpha: f64,
) -> Result<SelectionOutcome> {
    if rand.dim() != data.p() {
        return Err(domain("randomization dimension differs from number of columns"));
    }
    let thresholds = screening_thresholds(data, &rand.cov.diagonal(), alpha)?;
    screening_with_omega(data, &rand.draw(), thresholds)
}

/// Screening for a given randomization draw and thresholds.
///
/// The query solution is `o = clip(X^T y + omega, -zeta, zeta)`; the active
/// variable `o1 = t_E - z_E zeta_E` is the excess over the threshold.
pub fn screening_with_omega(
    data: &Dataset,
    omega: &Vector,
    thresholds: Vector,
) -> Result<SelectionOutcome> {
    let p = data.p();
    if omega.len() != p || thresholds.len() != p {
        return Err(domain("screening inputs have inconsistent lengths"));
    }
    let stat = data.x.transpose() * &data.y + omega;
    let active: Vec<usize> = (0..p).filter(|&j| stat[j].abs() >= thresholds[j]).collect();
    if active.is_empty() {
        return Err(Error::EmptySelection);
    }
    let inactive = complement(p, &active);
    let signs: Vec<f64> = active
        .iter()
        .map(|&j| if stat[j] >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let solution = Vector::from_fn(p, |j, _| stat[j].clamp(-thresholds[j], thresholds[j]));
    let subgradient = &stat - &solution;
    Ok(SelectionOutcome {
        penalty: Penalty::Screening { thresholds },
        o1: select_entries(&subgradient, &active),
        o2: select_entries(&stat, &inactive),
        signs,
        active,
        inactive,
        clusters: Vec::new(),
        omega: omega.clone(),
        solution,
        subgradient,
        kkt_residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn data() -> Dataset {
        Dataset::new(
            Matrix::from_row_slice(3, 2, &[1.0, 0.5, -1.0, 2.0, 0.0, 1.0]),
            Vector::from_vec(vec![1.0, -1.0, 2.0]),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn tiny_threshold_selects_everything() {
        let d = data();
        let rand = RandomizationSpec::isotropic(2, 0.5, 3).unwrap();
        let out = solve_marginal_screening(&d, &rand, 1.0 - 1e-12).unwrap();
        assert_eq!(out.active, vec![0, 1]);
    }

    #[test]
    fn tiny_alpha_is_empty() {
        let d = data();
        let rand = RandomizationSpec::isotropic(2, 0.5, 3).unwrap();
        assert_eq!(
            solve_marginal_screening(&d, &rand, 1e-300),
            Err(Error::EmptySelection)
        );
    }

    #[test]
    fn active_excess_has_selected_sign() {
        let d = data();
        let out = screening_with_omega(&d, &Vector::zeros(2), Vector::from_vec(vec![0.1, 0.1])).unwrap();
        for (o, z) in out.o1.iter().zip(&out.signs) {
            assert!(o * z >= 0.0);
        }
    }
}
