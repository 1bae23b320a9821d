//! Goodness-of-fit helpers for pivot checks.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub n: usize,
}

impl KsResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.pvalue > alpha
    }
}

/// One-sample Kolmogorov–Smirnov test against Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let u = u.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / nf - u).max(u - i as f64 / nf);
    }
    KsResult {
        statistic: d,
        pvalue: kolmogorov_sf(d, n),
        n,
    }
}

/// P(D_n > d) using Stephens' small-sample correction of the asymptotic law.
pub fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Empirical CDF evaluated at the sorted sample points: (x, F_n(x)).
pub fn ecdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i as f64 + 1.0) / n))
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evenly_spaced_points_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_uniform(&xs);
        assert!(r.statistic <= 0.0005 + 1e-12);
        assert!(r.pvalue > 0.99);
    }

    #[test]
    fn shifted_sample_fails() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i as f64 + 0.5) / 1000.0).powi(2)).collect();
        assert!(ks_uniform(&xs).pvalue < 1e-6);
    }

    #[test]
    fn critical_value_near_one_percent() {
        // Asymptotic 1% critical value is 1.6276/sqrt(n).
        let n = 10_000;
        let d = 1.6276 / (n as f64).sqrt();
        let p = kolmogorov_sf(d, n);
        assert!((p - 0.01).abs() < 1e-3, "p={p}");
    }
}
