use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use selinf::filedrawer::{threshold_from_level, FileDrawerProblem};
use selinf::rng;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn prob(tau: f64, eta2: f64) -> FileDrawerProblem {
    FileDrawerProblem::new(tau, eta2).unwrap()
}

/// Bisection for `f(x) = 0` with `f` increasing on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn threshold_matches_quantile_oracle() {
    let n = std_normal();
    let z95 = bisect(|x| n.cdf(x) - 0.95, 0.0, 10.0);
    assert!((z95 - 1.6449).abs() < 1e-4);
    assert!((threshold_from_level(0.05, 0.0).unwrap() - z95).abs() < 1e-10);
    assert!((threshold_from_level(0.05, 1.0).unwrap() - 2f64.sqrt() * z95).abs() < 1e-10);
    assert!((threshold_from_level(0.05, 1.0).unwrap() - 2.3262).abs() < 1e-4);
    assert_eq!(threshold_from_level(0.5, 1.0).unwrap(), 0.0);
}

#[test]
fn loglik_score_matches_finite_differences() {
    let h = 1e-5;
    for &(tau, eta2) in &[(0.0, 1.0), (1.5, 0.25), (-2.0, 4.0)] {
        let p = prob(tau, eta2);
        for &y in &[-1.0, 0.4, 2.5] {
            for &b in &[-2.0, 0.0, 1.0, 3.0] {
                let fd = (p.soft_trunc_loglik(y, b + h) - p.soft_trunc_loglik(y, b - h)) / (2.0 * h);
                assert!((fd - (y - p.grad_alpha(b))).abs() < 1e-6, "tau={tau} y={y} b={b}");
            }
        }
    }
}

#[test]
fn loglik_without_truncation_is_gaussian() {
    let p = prob(-100.0, 1.0);
    let y = 0.7;
    for i in -10..=10 {
        let b = 0.3 * i as f64;
        let diff = p.soft_trunc_loglik(y, b) - p.soft_trunc_loglik(y, 0.0);
        assert!((diff - (y * b - 0.5 * b * b)).abs() < 1e-8);
    }
}

#[test]
fn loglik_is_concave_on_grid() {
    let p = prob(0.5, 1.0);
    let h = 0.05;
    for i in -100..100 {
        let b = i as f64 * h;
        let second = p.soft_trunc_loglik(1.0, b + h) - 2.0 * p.soft_trunc_loglik(1.0, b) + p.soft_trunc_loglik(1.0, b - h);
        assert!(second <= 1e-12, "b={b}: {second}");
    }
}

#[test]
fn mle_matches_bisection_oracle() {
    let n = std_normal();
    let s = 2f64.sqrt();
    let grad = |b: f64| b + n.pdf(-b / s) / (s * n.sf(-b / s));
    let oracle = bisect(|b| grad(b) - 1.0, -20.0, 20.0);
    let m = prob(0.0, 1.0).solve_mle(1.0).unwrap();
    assert!((m - oracle).abs() < 1e-8, "{m} vs {oracle}");

    assert!((prob(-100.0, 1.0).solve_mle(1.3).unwrap() - 1.3).abs() < 1e-6);

    let p = prob(0.0, 1.0);
    let grid: Vec<f64> = (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect();
    let mles: Vec<f64> = grid.iter().map(|&y| p.solve_mle(y).unwrap()).collect();
    for (i, &y) in grid.iter().enumerate() {
        let o = bisect(|b| grad(b) - y, -60.0, 20.0);
        assert!((mles[i] - o).abs() < 1e-7, "y={y}");
    }
    assert!(mles.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn fisher_information_checks() {
    let free = prob(-100.0, 1.0);
    for i in -6..=6 {
        assert!((free.fisher_info(0.5 * i as f64) - 1.0).abs() < 1e-8);
    }
    let h = 1e-5;
    for &eta2 in &[0.04, 1.0, 4.0] {
        let p = prob(0.0, eta2);
        let floor = eta2 / (1.0 + eta2);
        for i in -50..=50 {
            let b = 0.1 * i as f64;
            let info = p.fisher_info(b);
            assert!(info >= floor, "eta2={eta2} b={b}: {info} < {floor}");
            let fd = (p.grad_alpha(b + h) - p.grad_alpha(b - h)) / (2.0 * h);
            assert!((fd - info).abs() < 1e-5, "eta2={eta2} b={b}");
        }
    }
}

#[test]
fn pivot_properties() {
    let p = prob(0.0, 1.0);
    let fit = p.fit(0.8).unwrap();
    assert!((fit.pivot_at(fit.beta_mle) - 0.5).abs() < 1e-15);
    for &d in &[0.1, 0.7, 2.0] {
        let sum = fit.pivot_at(fit.beta_mle + d) + fit.pivot_at(fit.beta_mle - d);
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let vals: Vec<f64> = (-20..=20).map(|i| p.pivot(0.8, 0.2 * i as f64).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn exact_density_without_truncation_is_normal() {
    let p = prob(-100.0, 1.0);
    let n = std_normal();
    let beta = 0.4;
    let ratio0 = p.exact_mle_density(0.0, beta) / n.pdf(0.0 - beta);
    for i in -30..=30 {
        let m = 0.1 * i as f64;
        let r = p.exact_mle_density(m, beta) / n.pdf(m - beta);
        assert!((r / ratio0 - 1.0).abs() < 1e-6, "m={m}");
    }
    let q = prob(0.0, 1.0);
    for i in -200..=200 {
        assert!(q.exact_mle_density(0.05 * i as f64, -1.0) >= 0.0);
    }
}

#[test]
fn exact_density_matches_rejection_sampled_mles() {
    let p = prob(0.0, 1.0);
    let beta = 0.5;
    // Independent sampler: draw (Y, W) until Y + W > tau.
    let mut g = rng::stream(2024, 0);
    let mut mles = Vec::with_capacity(50_000);
    while mles.len() < 50_000 {
        let y = beta + rng::std_normal(&mut g);
        let w = rng::std_normal(&mut g);
        if y + w > p.tau {
            mles.push(p.solve_mle(y).unwrap());
        }
    }
    let (lo, hi, bins) = (-8.0, 6.0, 70);
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0.0; bins];
    for m in &mles {
        if *m >= lo && *m < hi {
            hist[((m - lo) / width) as usize] += 1.0;
        }
    }
    let sub = 40;
    let dens: Vec<f64> = (0..bins)
        .map(|b| {
            (0..sub)
                .map(|k| p.exact_mle_density(lo + (b as f64 + (k as f64 + 0.5) / sub as f64) * width, beta))
                .sum::<f64>()
        })
        .collect();
    let total: f64 = dens.iter().sum();
    let tv: f64 = 0.5
        * hist
            .iter()
            .zip(&dens)
            .map(|(h, d)| (h / mles.len() as f64 - d / total).abs())
            .sum::<f64>();
    assert!(tv < 0.05, "total variation {tv}");
}

#[test]
fn mse_bound_holds_at_stated_points() {
    let p = prob(0.0, 1.0);
    let r = p.mse_bound_check(2.0, 4000, 9).unwrap();
    assert!(r.holds, "{r:?}");
    let r0 = p.mse_bound_check(0.0, 4000, 10).unwrap();
    assert!(r0.bound.is_finite() && r0.holds, "{r0:?}");
    assert!(p.mse_bound_check(0.0, 999, 1).is_err());
}

proptest! {
    #[test]
    fn estimating_equation_residual_is_tiny(y in -8.0f64..8.0, tau in -4.0f64..4.0, eta2 in 0.04f64..9.0) {
        let p = prob(tau, eta2);
        let m = p.solve_mle(y).unwrap();
        prop_assert!((p.grad_alpha(m) - y).abs() < 1e-10);
        prop_assert!(p.fisher_info(m) >= eta2 / (1.0 + eta2));
    }

    #[test]
    fn pivot_increases_in_beta(y in -3.0f64..3.0, b in -3.0f64..3.0, d in 0.01f64..2.0) {
        let p = prob(0.0, 1.0);
        prop_assert!(p.pivot(y, b + d).unwrap() > p.pivot(y, b).unwrap());
    }
}
