//! Inference after several independently randomized queries.
//!
//! The barrier program separates across queries, so each query's optimum
//! is found on its own and the estimates are combined in query order.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::linalg::{spd_inverse, symmetrize, Matrix, Vector};
use crate::mle::estimate::{schur_complement, score_shift};
use crate::mle::{implied_params, solve_barrier, BarrierSolution, FisherInfo, ImpliedParams, MleDiagnostics, MleResult};
use crate::queries::{
    build_target, kkt, ms_kkt, screening_thresholds, screening_with_omega, slope_kkt, slope_with_omega,
    solve_randomized_lasso, Dataset, KktAffine, RandomizationSpec, SelectionOutcome, TargetKind, TargetModel,
};

/// One query's affine KKT map and randomization covariance.
#[derive(Debug, Clone)]
pub struct QueryEntry {
    pub kkt: KktAffine,
    pub cov_w: Matrix,
}

#[derive(Debug, Clone)]
pub struct MultiQuerySetup {
    pub queries: Vec<QueryEntry>,
    pub target: TargetModel,
}

impl MultiQuerySetup {
    pub fn new(queries: Vec<QueryEntry>, target: TargetModel) -> Result<Self> {
        if queries.is_empty() {
            return Err(domain("need at least one query"));
        }
        if let Some(i) = queries.iter().position(|q| q.kkt.target_dim() != target.dim()) {
            return Err(domain(format!("query {i} has the wrong target dimension")));
        }
        Ok(Self { queries, target })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

fn tag<T>(index: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Query {
        index,
        source: Box::new(e),
    })
}

pub fn multi_implied_params(setup: &MultiQuerySetup) -> Result<Vec<ImpliedParams>> {
    setup
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| tag(i, implied_params(&q.kkt, &q.cov_w)))
        .collect()
}

/// Independent barrier solves at the observed target, in query order.
pub fn multi_solve(setup: &MultiQuerySetup, params: &[ImpliedParams]) -> Result<Vec<BarrierSolution>> {
    let beta_hat = &setup.target.beta_hat;
    let solved: Vec<Result<BarrierSolution>> = setup
        .queries
        .par_iter()
        .zip(params.par_iter())
        .enumerate()
        .map(|(i, (q, ip))| tag(i, solve_barrier(ip, beta_hat, &q.kkt.barrier, &q.kkt.o1)))
        .collect();
    solved.into_iter().collect()
}

/// `beta_hat + Sigma sum_l [A_l^T Sb_l^{-1} (A_l beta_hat + b_l - o_l*) + T_l beta_hat + c_l]`.
pub fn combine_mle(beta_hat: &Vector, cov: &Matrix, params: &[ImpliedParams], o_stars: &[Vector]) -> Vector {
    let mut score = Vector::zeros(beta_hat.len());
    for (ip, o) in params.iter().zip(o_stars) {
        score += score_shift(beta_hat, ip, o);
    }
    beta_hat + cov * score
}

pub fn multi_selective_mle(setup: &MultiQuerySetup) -> Result<Vector> {
    let params = multi_implied_params(setup)?;
    let sols = multi_solve(setup, &params)?;
    let o: Vec<Vector> = sols.into_iter().map(|s| s.o).collect();
    Ok(combine_mle(&setup.target.beta_hat, &setup.target.cov, &params, &o))
}

pub fn multi_fisher_info(
    setup: &MultiQuerySetup,
    params: &[ImpliedParams],
    o_stars: &[Vector],
) -> Result<FisherInfo> {
    let cov = &setup.target.cov;
    let hessians: Vec<Matrix> = setup
        .queries
        .iter()
        .zip(o_stars)
        .enumerate()
        .map(|(i, (q, o))| tag(i, q.kkt.barrier.eval(o).map(|e| e.hessian)))
        .collect::<Result<_>>()?;
    let prec = spd_inverse(cov, "target covariance")?;
    let terms: Vec<(&ImpliedParams, &Matrix)> = params.iter().zip(&hessians).collect();
    let m = schur_complement(&prec, &terms)?;
    let inverse = symmetrize(&(cov * &m * cov));
    let info = symmetrize(&(&prec * spd_inverse(&m, "likelihood curvature")? * &prec));
    Ok(FisherInfo { info, inverse })
}

pub fn multi_infer(setup: &MultiQuerySetup, level: f64) -> Result<MleResult> {
    crate::normal::two_sided_z(level)?;
    let params = multi_implied_params(setup)?;
    let sols = multi_solve(setup, &params)?;
    let o: Vec<Vector> = sols.iter().map(|s| s.o.clone()).collect();
    let target = &setup.target;
    let mle = combine_mle(&target.beta_hat, &target.cov, &params, &o);
    let fi = multi_fisher_info(setup, &params, &o)?;
    let mut out = MleResult::from_estimate(target.active.clone(), mle, fi.inverse, level)?;
    out.diagnostics = MleDiagnostics {
        barrier_iterations: sols.iter().map(|s| s.iterations).sum(),
        barrier_residual: sols.iter().map(|s| s.residual).fold(0.0, f64::max),
        o1_star: Vector::from_iterator(o.iter().map(|v| v.len()).sum(), o.iter().flat_map(|v| v.iter().copied())),
    };
    Ok(out)
}

/// Sorted union of the selected sets.
pub fn union_active(sets: &[&[usize]]) -> Vec<usize> {
    let mut all: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// Target on the union of the queries' selections.
pub fn union_target(data: &Dataset, outcomes: &[&SelectionOutcome], kind: TargetKind) -> Result<TargetModel> {
    let sets: Vec<&[usize]> = outcomes.iter().map(|o| o.active.as_slice()).collect();
    let active = union_active(&sets);
    if active.is_empty() {
        return Err(Error::EmptySelection);
    }
    build_target(data, &active, kind)
}

/// Two randomized lasso runs on the same data with independent draws,
/// inference for the union of their selections.
pub fn two_lasso_pipeline(
    data: &Dataset,
    rands: [&RandomizationSpec; 2],
    lambda: f64,
    epsilon: f64,
    kind: TargetKind,
) -> Result<MultiQuerySetup> {
    let outs = [
        solve_randomized_lasso(data, rands[0], lambda, epsilon)?,
        solve_randomized_lasso(data, rands[1], lambda, epsilon)?,
    ];
    let target = union_target(data, &[&outs[0], &outs[1]], kind)?;
    let queries = outs
        .iter()
        .zip(rands)
        .enumerate()
        .map(|(i, (o, r))| {
            tag(i, kkt(data, o, &target)).map(|k| QueryEntry {
                kkt: k,
                cov_w: r.cov.clone(),
            })
        })
        .collect::<Result<_>>()?;
    MultiQuerySetup::new(queries, target)
}

/// SLOPE weights for a design with `m` columns.
#[derive(Debug, Clone, PartialEq)]
pub enum SlopeWeights {
    /// `lam_j = top * (1 - 0.5 j / m)`, `j = 0..m`.
    Ramp { top: f64 },
    Explicit(Vector),
}

impl SlopeWeights {
    pub fn resolve(&self, m: usize) -> Result<Vector> {
        match self {
            Self::Ramp { top } => {
                if !(*top > 0.0) {
                    return Err(domain("SLOPE ramp needs a positive top weight"));
                }
                Ok(slope_ramp(m, *top))
            }
            Self::Explicit(v) if v.len() == m => Ok(v.clone()),
            Self::Explicit(v) => Err(domain(format!("need {m} SLOPE weights, got {}", v.len()))),
        }
    }
}

pub fn slope_ramp(m: usize, top: f64) -> Vector {
    Vector::from_fn(m, |j, _| top * (1.0 - 0.5 * j as f64 / m as f64))
}

/// Outcome of the screening-then-SLOPE pipeline.
#[derive(Debug, Clone)]
pub struct MsSlopeRun {
    pub setup: MultiQuerySetup,
    pub screening: SelectionOutcome,
    /// Stage-two outcome, indexed by columns of the screened design.
    pub slope: SelectionOutcome,
    /// Stage-two design is `X` restricted to these columns.
    pub screened: Vec<usize>,
}

/// Marginal screening at level `alpha`, then SLOPE on the screened columns
/// with its own randomization `N(0, slope_eta2 I)`. The target is the partial
/// regression on the final SLOPE selection.
pub fn ms_then_slope_pipeline(
    data: &Dataset,
    ms_rand: &RandomizationSpec,
    slope_eta2: f64,
    slope_seed: u64,
    alpha: f64,
    weights: &SlopeWeights,
) -> Result<MsSlopeRun> {
    if ms_rand.dim() != data.p() {
        return Err(domain("screening randomization has the wrong dimension"));
    }
    let thresholds = screening_thresholds(data, &ms_rand.cov.diagonal(), alpha)?;
    let screening = screening_with_omega(data, &ms_rand.draw(), thresholds)?;
    let screened = screening.active.clone();
    let reduced = data.restrict(&screened);
    let slope_rand = RandomizationSpec::isotropic(screened.len(), slope_eta2, slope_seed)?;
    let lam = weights.resolve(screened.len())?;
    let slope = slope_with_omega(&reduced, &slope_rand.draw(), &lam)?;
    let active: Vec<usize> = slope.active.iter().map(|&j| screened[j]).collect();
    let target = build_target(data, &active, TargetKind::Partial)?;
    let queries = vec![
        QueryEntry {
            kkt: tag(0, ms_kkt(data, &screening, &target))?,
            cov_w: ms_rand.cov.clone(),
        },
        QueryEntry {
            kkt: tag(1, slope_kkt(&reduced, &slope, &target))?,
            cov_w: slope_rand.cov.clone(),
        },
    ];
    Ok(MsSlopeRun {
        setup: MultiQuerySetup::new(queries, target)?,
        screening,
        slope,
        screened,
    })
}
