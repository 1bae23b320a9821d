//! Exact selective likelihood in one or two dimensions by adaptive
//! Gauss-Kronrod quadrature. Used as a reference for the barrier
//! approximation.

use crate::error::{domain, Error, Result};
use crate::linalg::{max_abs, spd_inverse, Matrix, SpdFactor, Vector};
use crate::normal;
use crate::queries::{KktAffine, TargetModel};

use super::barrier::BarrierSpec;
use super::implied::{implied_params, Canonical, ImpliedParams};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (and the center).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 40;

fn gk15<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let center = f(c);
    for n in 0..N {
        kron[n] = WGK[7] * center[n];
        gauss[n] = WG[3] * center[n];
    }
    for i in 0..7 {
        let lo = f(c - h * XGK[i]);
        let hi = f(c + h * XGK[i]);
        for n in 0..N {
            let s = lo[n] + hi[n];
            kron[n] += WGK[i] * s;
            if i % 2 == 1 {
                gauss[n] += WG[i / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for n in 0..N {
        kron[n] *= h;
        err = err.max((kron[n] - gauss[n] * h).abs());
    }
    (kron, err)
}

/// Adaptive G7K15 for a vector-valued integrand. The error target applies to
/// every component relative to the first (the mass).
pub fn integrate<const N: usize>(
    f: &mut impl FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<[f64; N]> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Quadrature(format!("bad interval [{a}, {b}]")));
    }
    if a == b {
        return Ok([0.0; N]);
    }
    let (whole, err) = gk15(f, a, b);
    let scale = whole.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut total = [0.0; N];
    let mut failed = false;
    recurse(f, a, b, whole, err, rel_tol * scale.max(f64::MIN_POSITIVE), 0, &mut total, &mut failed);
    if failed || total.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature(format!("no convergence on [{a}, {b}]")));
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<const N: usize>(
    f: &mut impl FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    est: [f64; N],
    err: f64,
    tol: f64,
    depth: usize,
    total: &mut [f64; N],
    failed: &mut bool,
) {
    if err <= tol || depth >= MAX_DEPTH {
        if err > tol && err > 1e-13 * est[0].abs() {
            *failed = true;
        }
        for n in 0..N {
            total[n] += est[n];
        }
        return;
    }
    let m = 0.5 * (a + b);
    let (left, el) = gk15(f, a, m);
    let (right, er) = gk15(f, m, b);
    recurse(f, a, m, left, el, tol / std::f64::consts::SQRT_2, depth + 1, total, failed);
    recurse(f, m, b, right, er, tol / std::f64::consts::SQRT_2, depth + 1, total, failed);
}

/// Mass, mean and covariance of `N(mean, cov)` restricted to `U o < v`.
#[derive(Debug, Clone)]
pub struct TruncatedMoments {
    pub log_mass: f64,
    pub mean: Vector,
    pub cov: Matrix,
}

const REL_TOL: f64 = 1e-12;
const WINDOW: f64 = 10.0;

/// Integration window for a normal `(m, s)` restricted to `[lo, hi]`.
fn window(m: f64, s: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if !(hi > lo) {
        return None;
    }
    let a = lo.max(m - WINDOW * s);
    let b = hi.min(m + WINDOW * s);
    if a < b {
        Some((a, b))
    } else if lo >= m {
        Some((lo, hi.min(lo + WINDOW * s)))
    } else {
        Some((lo.max(hi - WINDOW * s), hi))
    }
}

/// Interval of `o` allowed by rows `u o < v` (scalar `u`).
fn interval(rows: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (u, v) in rows {
        if u > 0.0 {
            hi = hi.min(v / u);
        } else if u < 0.0 {
            lo = lo.max(v / u);
        } else if v <= 0.0 {
            return (0.0, 0.0);
        }
    }
    (lo, hi)
}

/// `(log mass, mean, variance)` of a truncated univariate normal.
fn moments_1d(m: f64, s: f64, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
    let Some((a, b)) = window(m, s, lo, hi) else {
        return Ok((f64::NEG_INFINITY, m, 0.0));
    };
    let anchor = m.clamp(a, b);
    let offset = normal::log_pdf((anchor - m) / s) - s.ln();
    let mut f = |o: f64| {
        let w = (normal::log_pdf((o - m) / s) - s.ln() - offset).exp();
        let d = o - anchor;
        [w, w * d, w * d * d]
    };
    let [i0, i1, i2] = integrate(&mut f, a, b, REL_TOL)?;
    if !(i0 > 0.0) {
        return Ok((f64::NEG_INFINITY, m, 0.0));
    }
    let mu = i1 / i0;
    Ok((i0.ln() + offset, anchor + mu, (i2 / i0 - mu * mu).max(0.0)))
}

pub fn truncated_moments(mean: &Vector, cov: &Matrix, spec: &BarrierSpec) -> Result<TruncatedMoments> {
    let k = spec.dim();
    if mean.len() != k || cov.shape() != (k, k) {
        return Err(domain("truncated moments: inconsistent shapes"));
    }
    match k {
        1 => {
            let s = cov[(0, 0)].sqrt();
            let (lo, hi) = interval((0..spec.v.len()).map(|i| (spec.u[(i, 0)], spec.v[i])));
            let (log_mass, m, var) = moments_1d(mean[0], s, lo, hi)?;
            Ok(TruncatedMoments {
                log_mass,
                mean: Vector::from_element(1, m),
                cov: Matrix::from_element(1, 1, var),
            })
        }
        2 => moments_2d(mean, cov, spec),
        _ => Err(domain("exact quadrature supports at most two active variables")),
    }
}

fn moments_2d(mean: &Vector, cov: &Matrix, spec: &BarrierSpec) -> Result<TruncatedMoments> {
    let (m1, m2) = (mean[0], mean[1]);
    let s1 = cov[(0, 0)].sqrt();
    let slope = cov[(0, 1)] / cov[(0, 0)];
    let cond_var = cov[(1, 1)] - slope * cov[(0, 1)];
    if !(cond_var > 0.0) {
        return Err(Error::Singular("bivariate covariance".into()));
    }
    let cs = cond_var.sqrt();
    let rows = spec.v.len();
    let (lo1, hi1) = interval(
        (0..rows)
            .filter(|&i| spec.u[(i, 1)] == 0.0)
            .map(|i| (spec.u[(i, 0)], spec.v[i])),
    );
    let Some((a, b)) = window(m1, s1, lo1, hi1) else {
        return Err(Error::Quadrature("empty constraint region".into()));
    };
    let anchor = m1.clamp(a, b);
    let offset = normal::log_pdf((anchor - m1) / s1) - s1.ln();
    let mut inner_err = None;
    let mut f = |o1: f64| {
        let (lo, hi) = interval(
            (0..rows)
                .filter(|&i| spec.u[(i, 1)] != 0.0)
                .map(|i| (spec.u[(i, 1)], spec.v[i] - spec.u[(i, 0)] * o1)),
        );
        let cm = m2 + slope * (o1 - m1);
        match moments_1d(cm, cs, lo, hi) {
            Ok((lq, e, w)) => {
                let wt = (normal::log_pdf((o1 - m1) / s1) - s1.ln() - offset + lq).exp();
                let d1 = o1 - anchor;
                let d2 = e - m2;
                [wt, wt * d1, wt * d2, wt * d1 * d1, wt * d1 * d2, wt * (w + d2 * d2)]
            }
            Err(e) => {
                inner_err = Some(e);
                [0.0; 6]
            }
        }
    };
    let i = integrate(&mut f, a, b, REL_TOL)?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    if !(i[0] > 0.0) {
        return Err(Error::Quadrature("selection region has zero mass".into()));
    }
    let e1 = i[1] / i[0];
    let e2 = i[2] / i[0];
    let mut c = Matrix::zeros(2, 2);
    c[(0, 0)] = i[3] / i[0] - e1 * e1;
    c[(0, 1)] = i[4] / i[0] - e1 * e2;
    c[(1, 0)] = c[(0, 1)];
    c[(1, 1)] = i[5] / i[0] - e2 * e2;
    Ok(TruncatedMoments {
        log_mass: i[0].ln() + offset,
        mean: Vector::from_vec(vec![anchor + e1, m2 + e2]),
        cov: c,
    })
}

/// `log f(beta)`: log probability that `N(A beta + b, sigma_bar)` satisfies
/// the constraints.
pub fn log_selection_probability(ip: &ImpliedParams, beta: &Vector, spec: &BarrierSpec) -> Result<f64> {
    Ok(truncated_moments(&ip.mean(beta), &ip.sigma_bar, spec)?.log_mass)
}

/// Exact log-likelihood (up to a constant) and conditional moments of the
/// target at parameter `breve`.
#[derive(Debug, Clone)]
pub struct ExactEval {
    pub loglik: f64,
    /// Conditional mean of the target statistic given selection.
    pub mean: Vector,
    /// Conditional covariance of the target statistic given selection.
    pub cov: Matrix,
}

pub fn exact_eval(
    beta_hat: &Vector,
    breve: &Vector,
    cov: &Matrix,
    ip: &ImpliedParams,
    spec: &BarrierSpec,
) -> Result<ExactEval> {
    let canon = Canonical::new(cov, &[ip])?;
    let theta = canon.theta(breve);
    let cov = &canon.cov;
    let gamma = &ip.sigma_bar + &ip.a * cov * ip.a.transpose();
    let mo = truncated_moments(&ip.mean(&theta), &gamma, spec)?;
    if !mo.log_mass.is_finite() {
        return Err(Error::Quadrature("selection probability underflows".into()));
    }
    let diff = beta_hat - &theta;
    let quad = diff.dot(&(&canon.prec * &diff));
    // Regression of the target on O under the joint Gaussian law.
    let gain = cov * ip.a.transpose() * spd_inverse(&gamma, "marginal covariance of O1")?;
    let mean = &theta + &gain * (&mo.mean - ip.mean(&theta));
    let cond = cov - &gain * &ip.a * cov + &gain * &mo.cov * gain.transpose();
    Ok(ExactEval {
        loglik: -0.5 * quad - mo.log_mass,
        mean,
        cov: crate::linalg::symmetrize(&cond),
    })
}

/// Maximizer of the exact selective likelihood: a grid search followed by
/// Newton steps on the moment equation `E[beta_hat | selection] = beta_hat`.
pub fn exact_mle(beta_hat: &Vector, cov: &Matrix, ip: &ImpliedParams, spec: &BarrierSpec) -> Result<Vector> {
    let d = beta_hat.len();
    if d == 0 || d > 2 || cov.shape() != (d, d) {
        return Err(domain("exact MLE supports targets of dimension one or two"));
    }
    let sd = cov.diagonal().map(f64::sqrt);
    let steps: Vec<f64> = (-20..=20).map(|i| 0.5 * i as f64).collect();
    let mut best: Option<(f64, Vector)> = None;
    let mut consider = |b: Vector| {
        if let Ok(e) = exact_eval(beta_hat, &b, cov, ip, spec) {
            if best.as_ref().is_none_or(|(l, _)| e.loglik > *l) {
                best = Some((e.loglik, b));
            }
        }
    };
    if d == 1 {
        for s in &steps {
            consider(beta_hat + &sd * *s);
        }
    } else {
        for s in steps.iter().step_by(2) {
            for t in steps.iter().step_by(2) {
                consider(Vector::from_vec(vec![beta_hat[0] + s * sd[0], beta_hat[1] + t * sd[1]]));
            }
        }
    }
    let (_, mut breve) = best.ok_or_else(|| Error::Quadrature("likelihood undefined on the search grid".into()))?;
    let mut ev = exact_eval(beta_hat, &breve, cov, ip, spec)?;
    for _ in 0..100 {
        let g = beta_hat - &ev.mean;
        if max_abs(&g) < 1e-11 * sd.max() {
            return Ok(breve);
        }
        // Newton in the natural parameter eta = Sigma^{-1} breve.
        let deta = SpdFactor::new(&ev.cov, "conditional covariance")?.solve_vec(&g);
        let step = cov * deta;
        let mut t = 1.0;
        loop {
            let trial = &breve + &step * t;
            if let Ok(e) = exact_eval(beta_hat, &trial, cov, ip, spec) {
                if e.loglik >= ev.loglik - 1e-12 * ev.loglik.abs().max(1.0) {
                    breve = trial;
                    ev = e;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Err(Error::NotConverged {
                    solver: "exact MLE",
                    iterations: 100,
                    residual: max_abs(&g),
                });
            }
        }
    }
    Err(Error::NotConverged {
        solver: "exact MLE",
        iterations: 100,
        residual: max_abs(&(beta_hat - &ev.mean)),
    })
}

/// Exact selective MLE for a solved query with at most two active
/// variables and target dimension at most two.
pub fn exact_small_dim_oracle(target: &TargetModel, kkt: &KktAffine, cov_w: &Matrix) -> Result<Vector> {
    let ip = implied_params(kkt, cov_w)?;
    exact_mle(&target.beta_hat, &target.cov, &ip, &kkt.barrier)
}
