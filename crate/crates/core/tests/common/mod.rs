//! Instance generators and finite-difference helpers shared by the
//! integration tests.
#![allow(dead_code)]

use selinf::linalg::{Matrix, Vector};
use selinf::multi::{two_lasso_pipeline, MultiQuerySetup};
use selinf::queries::{
    build_target, kkt, screening_thresholds, screening_with_omega, slope_with_omega, solve_randomized_lasso, Dataset,
    KktAffine, RandomizationSpec, SelectionOutcome, TargetKind, TargetModel,
};
use selinf::rng;

/// Rows `N(0, I)` divided by `sqrt(n)`, unit noise, signal `sqrt(n) * beta`.
pub fn scaled_data(n: usize, p: usize, beta: &[(usize, f64)], seed: u64) -> (Dataset, Vector) {
    let mut g = rng::stream(seed, 0);
    let x = Matrix::from_fn(n, p, |_, _| rng::std_normal(&mut g)) / (n as f64).sqrt();
    let mut coef = Vector::zeros(p);
    for &(j, b) in beta {
        coef[j] = b * (n as f64).sqrt();
    }
    let mean = &x * &coef;
    let y = &mean + rng::std_normal_vec(&mut g, n);
    (Dataset::new(x, y, 1.0).unwrap(), mean)
}

/// A solved single query together with its target.
pub struct Instance {
    pub data: Dataset,
    pub mean: Vector,
    pub outcome: SelectionOutcome,
    pub target: TargetModel,
    pub kkt: KktAffine,
    pub cov_w: Matrix,
}

impl Instance {
    pub fn estimand(&self) -> Vector {
        self.target.estimand(&self.mean)
    }
}

fn finish(data: Dataset, mean: Vector, outcome: SelectionOutcome, cov_w: Matrix, kind: TargetKind, max_dim: usize) -> Option<Instance> {
    if outcome.active.is_empty() || outcome.active.len() > max_dim {
        return None;
    }
    if kind == TargetKind::Full && data.p() >= data.n() {
        return None;
    }
    let target = build_target(&data, &outcome.active, kind).ok()?;
    let k = kkt(&data, &outcome, &target).ok()?;
    Some(Instance {
        data,
        mean,
        outcome,
        target,
        kkt: k,
        cov_w,
    })
}

/// Randomized lasso on an `n = 100, p = 10` design, or `None` when the
/// selection is empty or larger than `max_dim`.
pub fn lasso_instance(seed: u64, kind: TargetKind, max_dim: usize) -> Option<Instance> {
    let amp = 0.25 + 0.1 * (seed % 4) as f64;
    lasso_instance_with(&[(1, amp), (4, -amp), (7, 0.5 * amp)], 2.6, seed, kind, max_dim)
}

/// Randomized lasso with `eta2 = 0.5` on an `n = 100, p = 10` design with
/// the given coefficients.
pub fn lasso_instance_with(beta: &[(usize, f64)], lambda: f64, seed: u64, kind: TargetKind, max_dim: usize) -> Option<Instance> {
    let (data, mean) = scaled_data(100, 10, beta, seed);
    let rand = RandomizationSpec::isotropic(10, 0.5, seed.wrapping_add(1000)).ok()?;
    let out = solve_randomized_lasso(&data, &rand, lambda, 0.1).ok()?;
    finish(data, mean, out, rand.cov, kind, max_dim)
}

pub fn screening_instance(seed: u64, max_dim: usize) -> Option<Instance> {
    let (data, mean) = scaled_data(100, 8, &[(2, 0.3), (5, -0.25)], seed);
    let rand = RandomizationSpec::isotropic(8, 1.0, seed.wrapping_add(2000)).ok()?;
    let thr = screening_thresholds(&data, &rand.cov.diagonal(), 0.1).ok()?;
    let out = screening_with_omega(&data, &rand.draw(), thr).ok()?;
    finish(data, mean, out, rand.cov, TargetKind::Partial, max_dim)
}

pub fn slope_instance(seed: u64, max_dim: usize) -> Option<Instance> {
    let (data, mean) = scaled_data(100, 8, &[(0, 0.4), (3, -0.4), (6, 0.25)], seed);
    let rand = RandomizationSpec::isotropic(8, 0.5, seed.wrapping_add(3000)).ok()?;
    let lam = selinf::multi::slope_ramp(8, 2.6);
    let out = slope_with_omega(&data, &rand.draw(), &lam).ok()?;
    finish(data, mean, out, rand.cov, TargetKind::Partial, max_dim)
}

/// Two randomized lassos on one dataset with a union target of size at
/// most `max_dim`.
pub fn two_lasso_instance(seed: u64, max_dim: usize) -> Option<MultiQuerySetup> {
    let (data, _) = scaled_data(100, 10, &[(1, 0.3), (4, -0.3), (7, 0.15)], seed);
    let r1 = RandomizationSpec::isotropic(10, 0.5, seed.wrapping_add(4000)).ok()?;
    let r2 = RandomizationSpec::isotropic(10, 0.8, seed.wrapping_add(5000)).ok()?;
    let setup = two_lasso_pipeline(&data, [&r1, &r2], 2.6, 0.1, TargetKind::Partial).ok()?;
    (setup.target.dim() <= max_dim).then_some(setup)
}

pub fn fd_gradient(f: &dyn Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

pub fn fd_hessian(f: &dyn Fn(&Vector) -> f64, x: &Vector, h: f64) -> Matrix {
    let d = x.len();
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = x.clone();
        y[di] += si * h;
        y[dj] += sj * h;
        f(&y)
    };
    Matrix::from_fn(d, d, |i, j| {
        (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0)) / (4.0 * h * h)
    })
}

/// Maximizes a smooth concave function by Newton steps with
/// finite-difference derivatives.
pub fn fd_newton_max(f: &dyn Fn(&Vector) -> f64, x0: &Vector, h: f64) -> Vector {
    let mut x = x0.clone();
    let mut fx = f(&x);
    for _ in 0..100 {
        let g = fd_gradient(f, &x, h);
        if g.amax() < 1e-9 {
            break;
        }
        let hess = fd_hessian(f, &x, h * 10.0);
        let step = -hess.lu().solve(&g).expect("nonsingular Hessian");
        let mut t = 1.0;
        while t > 1e-8 {
            let trial = &x + &step * t;
            let ft = f(&trial);
            if ft.is_finite() && ft >= fx - 1e-12 * fx.abs().max(1.0) {
                x = trial;
                fx = ft;
                break;
            }
            t *= 0.5;
        }
    }
    x
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm()
}
