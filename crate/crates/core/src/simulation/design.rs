//! Synthetic regression designs and coefficient vectors.

use crate::error::{domain, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::{self, Rng};

/// AR(1) covariance `Sigma_ij = rho^|i-j|`.
pub fn ar1_cov(p: usize, rho: f64) -> Matrix {
    Matrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `n x p` matrix whose rows are i.i.d. `N(0, ar1_cov(p, rho))`, generated by
/// the AR(1) recursion along each row.
pub fn gen_design(n: usize, p: usize, rho: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(rho.abs() < 1.0) {
        return Err(domain(format!("autocorrelation must satisfy |rho| < 1, got {rho}")));
    }
    if n == 0 || p == 0 {
        return Err(domain("design dimensions must be positive"));
    }
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let mut prev = rng::std_normal(rng);
        x[(i, 0)] = prev;
        for j in 1..p {
            prev = rho * prev + innov * rng::std_normal(rng);
            x[(i, j)] = prev;
        }
    }
    Ok(x)
}

/// `k` roughly equally spaced indices covering `0..p`.
pub fn spread_indices(p: usize, k: usize) -> Vec<usize> {
    if k == 1 {
        return vec![0];
    }
    (0..k)
        .map(|i| (i as f64 * (p - 1) as f64 / (k - 1) as f64).round() as usize)
        .collect()
}

/// Six nonzeros `-10, -6, -2, 2, 6, 10` at equally spaced positions.
pub fn beta_type4(p: usize) -> Result<Vector> {
    if p < 6 {
        return Err(domain(format!("beta-type 4 needs p >= 6, got {p}")));
    }
    let mut beta = Vector::zeros(p);
    for (j, a) in spread_indices(p, 6).into_iter().zip([-10.0, -6.0, -2.0, 2.0, 6.0, 10.0]) {
        beta[j] = a;
    }
    Ok(beta)
}

/// `s` equal positive entries at equally spaced positions.
pub fn beta_flat(p: usize, s: usize, amplitude: f64) -> Result<Vector> {
    if s == 0 || s > p {
        return Err(domain(format!("flat signal needs 1 <= s <= p, got s={s}, p={p}")));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(domain("flat signal amplitude must be positive"));
    }
    let mut beta = Vector::zeros(p);
    for j in spread_indices(p, s) {
        beta[j] = amplitude;
    }
    Ok(beta)
}

/// Noise variance giving the requested signal-to-noise ratio `beta' Sigma beta / sigma2`.
pub fn snr_to_sigma2(beta: &Vector, sigma: &Matrix, snr: f64) -> Result<f64> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(domain(format!("SNR must be positive, got {snr}")));
    }
    let q = beta.dot(&(sigma * beta));
    if !(q > 0.0) {
        return Err(domain("signal has zero variance"));
    }
    Ok(q / snr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_hits_both_ends() {
        assert_eq!(spread_indices(50, 6), vec![0, 10, 20, 29, 39, 49]);
        assert_eq!(spread_indices(6, 6), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn flat_signal_rejects_bad_sparsity() {
        assert!(beta_flat(5, 0, 1.0).is_err());
        assert!(beta_flat(5, 6, 1.0).is_err());
        assert_eq!(beta_flat(5, 5, 2.0).unwrap().sum(), 10.0);
    }
}
