//! Randomized SLOPE (sorted-l1 penalized least squares).
//!
//! Minimizes `0.5 ||y - X o||^2 - omega^T o + sum_j lam_j |o|_(j)` by
//! monotone FISTA, then polishes on the detected cluster structure.

use crate::error::{domain, Error, Result};
use crate::linalg::{max_abs, max_eigenvalue, Matrix, SpdFactor, Vector};

use super::{complement, Dataset, Penalty, RandomizationSpec, SelectionOutcome};

/// Proximal operator of the sorted-l1 norm with weights `lam` (nonincreasing,
/// nonnegative), by pool-adjacent-violators on the sorted magnitudes.
pub fn slope_prox(u: &Vector, lam: &Vector) -> Vector {
    assert_eq!(u.len(), lam.len(), "slope_prox: length mismatch");
    let p = u.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()).then(a.cmp(&b)));

    // Blocks of (start, end exclusive, sum); value = sum / len.
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(p);
    for (i, &j) in order.iter().enumerate() {
        blocks.push((i, i + 1, u[j].abs() - lam[i]));
        while blocks.len() > 1 {
            let (s1, e1, w1) = blocks[blocks.len() - 1];
            let (s0, e0, w0) = blocks[blocks.len() - 2];
            if w0 / (e0 - s0) as f64 > w1 / (e1 - s1) as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s0, e1, w0 + w1);
        }
    }
    let mut out = Vector::zeros(p);
    for (s, e, w) in blocks {
        let value = (w / (e - s) as f64).max(0.0);
        for &j in &order[s..e] {
            out[j] = if u[j] < 0.0 { -value } else { value };
        }
    }
    out
}

/// Sorted-l1 norm `sum_j lam_j |o|_(j)`.
pub fn sorted_l1(o: &Vector, lam: &Vector) -> f64 {
    let mut mags: Vec<f64> = o.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().zip(lam.iter()).map(|(m, l)| m * l).sum()
}

/// Raw solver output before the selection outcome is assembled.
#[derive(Debug, Clone)]
pub struct SlopeFit {
    pub solution: Vector,
    /// Objective after every iteration (nonincreasing).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

const MAX_ITER: usize = 200_000;
const TOL: f64 = 1e-13;
const POLISH_EVERY: usize = 50;
const POLISH_TOL: f64 = 1e-10;

fn validate_lambdas(lam: &Vector, p: usize) -> Result<()> {
    if lam.len() != p {
        return Err(domain(format!("need {p} SLOPE weights, got {}", lam.len())));
    }
    if lam.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(domain("SLOPE weights must be positive"));
    }
    if lam.as_slice().windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("SLOPE weights must be strictly decreasing"));
    }
    Ok(())
}

/// Monotone FISTA with restart on the randomized SLOPE objective.
///
/// Every `POLISH_EVERY` iterations the cluster structure of the iterate is
/// re-solved exactly; the run stops early once that point meets the KKT
/// conditions to `POLISH_TOL` relative to `max |X^T y + omega|`.
pub fn fit(x: &Matrix, y: &Vector, omega: &Vector, lam: &Vector) -> Result<SlopeFit> {
    let p = x.ncols();
    let gram = x.transpose() * x;
    let c = x.transpose() * y + omega;
    let lipschitz = max_eigenvalue(&gram).max(f64::MIN_POSITIVE);
    let scaled = lam / lipschitz;
    let objective =
        |o: &Vector| 0.5 * o.dot(&(&gram * o)) - c.dot(o) + sorted_l1(o, lam);
    let scale = max_abs(&c).max(1.0);

    let mut xk = Vector::zeros(p);
    let mut yk = xk.clone();
    let mut t: f64 = 1.0;
    let mut fx = objective(&xk);
    let mut trace = vec![fx];
    let mut step = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let grad = &gram * &yk - &c;
        let z = slope_prox(&(&yk - grad / lipschitz), &scaled);
        step = max_abs(&(&z - &yk));
        let fz = objective(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz <= fx {
            let prev = std::mem::replace(&mut xk, z);
            yk = &xk + (&xk - &prev) * ((t - 1.0) / t_next);
            t = t_next;
            fx = fz;
        } else {
            // Restart momentum from the last accepted point.
            yk = xk.clone();
            t = 1.0;
        }
        trace.push(fx);
        if step <= TOL * max_abs(&xk).max(1.0) {
            return Ok(SlopeFit {
                solution: xk,
                objective_trace: trace,
                iterations: it,
            });
        }
        if it % POLISH_EVERY == 0 {
            let groups = clusters(&xk, 1e-10);
            if let Some(pol) = polish(&gram, &c, lam, &xk, &groups) {
                let fp = objective(&pol);
                if fp <= fx + 1e-10 * fx.abs().max(1.0) && kkt_violation(&pol, &(&c - &gram * &pol), lam, &groups) < POLISH_TOL * scale {
                    trace.push(fp);
                    return Ok(SlopeFit {
                        solution: pol,
                        objective_trace: trace,
                        iterations: it,
                    });
                }
            }
        }
    }
    Err(Error::NotConverged {
        solver: "SLOPE proximal gradient",
        iterations: MAX_ITER,
        residual: step,
    })
}

/// Groups nonzero coordinates by tied magnitude, largest first; indices
/// ascending within a cluster.
pub fn clusters(o: &Vector, threshold: f64) -> Vec<Vec<usize>> {
    let tie = 1e-9 * max_abs(o).max(1.0);
    let mut order: Vec<usize> = (0..o.len()).filter(|&j| o[j].abs() > threshold).collect();
    order.sort_by(|&a, &b| o[b].abs().total_cmp(&o[a].abs()).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut anchor = f64::NAN;
    for j in order {
        let m = o[j].abs();
        match out.last_mut() {
            Some(last) if (anchor - m).abs() <= tie => last.push(j),
            _ => {
                out.push(vec![j]);
                anchor = m;
            }
        }
    }
    for c in &mut out {
        c.sort_unstable();
    }
    out
}

/// Largest violation of the sorted-l1 subgradient conditions for `g` at `o`.
pub fn kkt_violation(o: &Vector, g: &Vector, lam: &Vector, groups: &[Vec<usize>]) -> f64 {
    let p = o.len();
    let mut worst: f64 = 0.0;
    let mut rank = 0;
    for group in groups {
        let seg = &lam.as_slice()[rank..rank + group.len()];
        rank += group.len();
        let mut vals: Vec<f64> = Vec::with_capacity(group.len());
        for &j in group {
            let signed = g[j] * o[j].signum();
            worst = worst.max(-signed);
            vals.push(signed);
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        let (mut acc, mut bound) = (0.0, 0.0);
        for (v, l) in vals.iter().zip(seg) {
            acc += v;
            bound += l;
            worst = worst.max(acc - bound);
        }
        worst = worst.max((acc - bound).abs());
    }
    let active: Vec<usize> = groups.iter().flatten().copied().collect();
    let mut rest: Vec<f64> = complement(p, &active).iter().map(|&j| g[j].abs()).collect();
    rest.sort_by(|a, b| b.total_cmp(a));
    let (mut acc, mut bound) = (0.0, 0.0);
    for (v, l) in rest.iter().zip(&lam.as_slice()[rank..]) {
        acc += v;
        bound += l;
        worst = worst.max(acc - bound);
    }
    worst
}

/// Re-solves for the cluster magnitudes given signs and cluster structure.
fn polish(
    gram: &Matrix,
    c: &Vector,
    lam: &Vector,
    o: &Vector,
    groups: &[Vec<usize>],
) -> Option<Vector> {
    let p = o.len();
    let k = groups.len();
    let mut d = Matrix::zeros(p, k);
    let mut pen = Vector::zeros(k);
    let mut rank = 0;
    for (col, group) in groups.iter().enumerate() {
        for &j in group {
            d[(j, col)] = o[j].signum();
            pen[col] += lam[rank];
            rank += 1;
        }
    }
    if k == 0 {
        return None;
    }
    let lhs = d.transpose() * gram * &d;
    let rhs = d.transpose() * c - pen;
    let mags = SpdFactor::new(&lhs, "SLOPE polish").ok()?.solve_vec(&rhs);
    if mags[k - 1] <= 0.0 || mags.as_slice().windows(2).any(|w| w[1] >= w[0]) {
        return None;
    }
    Some(d * mags)
}

pub fn solve_randomized_slope(
    data: &Dataset,
    rand: &RandomizationSpec,
    lam: &Vector,
) -> Result<SelectionOutcome> {
    if rand.dim() != data.p() {
        return Err(domain("randomization dimension differs from number of columns"));
    }
    slope_with_omega(data, &rand.draw(), lam)
}

pub fn slope_with_omega(data: &Dataset, omega: &Vector, lam: &Vector) -> Result<SelectionOutcome> {
    let p = data.p();
    validate_lambdas(lam, p)?;
    if omega.len() != p {
        return Err(domain("randomization length differs from number of columns"));
    }
    let (x, y) = (&data.x, &data.y);
    let raw = fit(x, y, omega, lam)?;
    let groups = clusters(&raw.solution, 1e-10);
    if groups.is_empty() {
        return Err(Error::EmptySelection);
    }
    let gram = x.transpose() * x;
    let c = x.transpose() * y + omega;
    let scale = max_abs(&c).max(1.0);
    let subgrad = |o: &Vector| &c - &gram * o;

    let mut solution = raw.solution.clone();
    let mut residual = kkt_violation(&solution, &subgrad(&solution), lam, &groups);
    if let Some(polished) = polish(&gram, &c, lam, &raw.solution, &groups) {
        let r = kkt_violation(&polished, &subgrad(&polished), lam, &groups);
        if r <= residual.max(1e-8 * scale) {
            solution = polished;
            residual = r;
        }
    }
    if !(residual < 1e-8 * scale) {
        return Err(Error::NotConverged {
            solver: "SLOPE KKT check",
            iterations: raw.iterations,
            residual,
        });
    }

    let g = subgrad(&solution);
    let mut active: Vec<usize> = groups.iter().flatten().copied().collect();
    active.sort_unstable();
    let signs: Vec<f64> = active.iter().map(|&j| solution[j].signum()).collect();
    let inactive = complement(p, &active);
    let o1 = Vector::from_iterator(groups.len(), groups.iter().map(|grp| solution[grp[0]]));
    Ok(SelectionOutcome {
        penalty: Penalty::Slope {
            lambdas: lam.clone(),
        },
        o1,
        o2: crate::linalg::select_entries(&g, &inactive),
        signs,
        active,
        inactive,
        clusters: groups,
        omega: omega.clone(),
        solution,
        subgradient: g,
        kkt_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_prox_is_soft_threshold() {
        let out = slope_prox(&Vector::from_element(1, 3.0), &Vector::from_element(1, 1.0));
        assert_eq!(out[0], 2.0);
        let out = slope_prox(&Vector::from_element(1, -0.5), &Vector::from_element(1, 1.0));
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn equal_weights_match_soft_threshold() {
        let u = Vector::from_vec(vec![3.0, -1.5, 0.2, -4.0]);
        let out = slope_prox(&u, &Vector::from_element(4, 1.0));
        let expect = Vector::from_vec(vec![2.0, -0.5, 0.0, -3.0]);
        assert!((out - expect).amax() < 1e-15);
    }

    #[test]
    fn pooled_block() {
        // |u| - lam = (1, 2): violates ordering, pooled to 1.5 each.
        let u = Vector::from_vec(vec![3.0, 2.9]);
        let lam = Vector::from_vec(vec![2.0, 0.9]);
        let out = slope_prox(&u, &lam);
        assert!((out[0] - 1.5).abs() < 1e-15 && (out[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn weights_are_validated() {
        let data = Dataset::new(Matrix::identity(2, 2), Vector::zeros(2), 1.0).unwrap();
        let omega = Vector::zeros(2);
        assert!(slope_with_omega(&data, &omega, &Vector::from_vec(vec![1.0, 1.0])).is_err());
        assert!(slope_with_omega(&data, &omega, &Vector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn orthogonal_design_is_prox_of_response() {
        let data = Dataset::new(
            Matrix::identity(3, 3),
            Vector::from_vec(vec![5.0, -3.0, 0.5]),
            1.0,
        )
        .unwrap();
        let lam = Vector::from_vec(vec![1.5, 1.0, 0.8]);
        let out = slope_with_omega(&data, &Vector::zeros(3), &lam).unwrap();
        let expect = slope_prox(&data.y, &lam);
        assert!((&out.solution - expect).amax() < 1e-10);
        assert_eq!(out.active, vec![0, 1]);
        assert_eq!(out.clusters, vec![vec![0], vec![1]]);
    }
}
