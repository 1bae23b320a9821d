//! Simulation harness: AR(1) designs, tuning schemes, replications and
//! per-SNR summaries.
//!
//! Rows of the design are drawn from `N(0, Sigma)` and the design is then
//! divided by `sqrt(n)`, so the randomization ratio `eta^2 / sigma^2` compares
//! like with like: `X^T eps` has covariance close to `sigma^2 Sigma`.
//!
//! Replication `r` of SNR cell `c` draws from stream `(c << 32) | r` of the
//! master seed, and summaries are reduced in replication order, so a
//! configuration reproduces bit for bit regardless of thread count.

pub mod design;
pub mod metrics;
pub mod tuning;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::mle::{infer, MleResult};
use crate::multi::{multi_infer, ms_then_slope_pipeline, two_lasso_pipeline, SlopeWeights};
use crate::queries::{
    build_target, kkt, solve_randomized_lasso, Dataset, LassoSolver, RandomizationSpec, TargetKind, TargetModel,
};
use crate::rng;

pub use design::{ar1_cov, beta_flat, beta_type4, gen_design, snr_to_sigma2, spread_indices};
pub use metrics::{aggregate, relative_risk, CellSummary, RepStatus, ReplicationSummary, RiskRecord};
pub use tuning::{cross_validate_lambda, lambda_grid, lambda_theory, CvPath};

/// SNR grid used in the lasso experiments.
pub const DEFAULT_SNR_GRID: [f64; 9] = [0.15, 0.21, 0.26, 0.31, 0.42, 0.71, 1.22, 2.07, 3.52];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Signal {
    /// Six nonzeros `-10, -6, -2, 2, 6, 10`, equally spaced.
    Type4,
    /// `s` equal entries, equally spaced.
    Flat { s: usize, amplitude: f64 },
}

impl Signal {
    pub fn beta(&self, p: usize) -> Result<Vector> {
        match self {
            Self::Type4 => beta_type4(p),
            Self::Flat { s, amplitude } => beta_flat(p, *s, *amplitude),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaScheme {
    #[serde(rename = "theory")]
    Theory,
    #[serde(rename = "cv_min")]
    CvMin,
    #[serde(rename = "cv_1se")]
    Cv1se,
}

impl std::str::FromStr for LambdaScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "theory" => Ok(Self::Theory),
            "cv.min" | "cv_min" => Ok(Self::CvMin),
            "cv.1se" | "cv_1se" => Ok(Self::Cv1se),
            other => Err(format!("unknown lambda scheme '{other}' (expected theory, cv.min or cv.1se)")),
        }
    }
}

/// Which selection pipeline a replication runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One randomized lasso.
    Lasso,
    /// Two independently randomized lassos, union target.
    TwoLasso,
    /// Randomized marginal screening followed by randomized SLOPE on the
    /// screened columns; always a partial target.
    MsSlope,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lasso" => Ok(Self::Lasso),
            "two_lasso" | "two-lasso" | "lasso2" => Ok(Self::TwoLasso),
            "ms_slope" | "ms-slope" => Ok(Self::MsSlope),
            other => Err(format!("unknown method '{other}' (expected lasso, two-lasso or ms-slope)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub signal: Signal,
    pub snr_grid: Vec<f64>,
    pub lambda_scheme: LambdaScheme,
    /// Randomization variance over estimated noise variance.
    pub rand_ratio: f64,
    pub reps: usize,
    pub seed: u64,
    pub target_kind: TargetKind,
    pub method: Method,
    /// Intervals have level `1 - level`.
    pub level: f64,
    /// Screening level for the first stage of `MsSlope`.
    pub screening_alpha: f64,
    /// Monte-Carlo draws for the theoretical lambda.
    pub lambda_draws: usize,
    pub cv_folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 200,
            p: 50,
            rho: 0.35,
            signal: Signal::Type4,
            snr_grid: DEFAULT_SNR_GRID.to_vec(),
            lambda_scheme: LambdaScheme::Theory,
            rand_ratio: 0.5,
            reps: 500,
            seed: 1,
            target_kind: TargetKind::Partial,
            method: Method::Lasso,
            level: 0.1,
            screening_alpha: 0.1,
            lambda_draws: 500,
            cv_folds: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.snr_grid.is_empty() || self.snr_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(domain("SNR grid must be nonempty with positive values"));
        }
        if self.reps == 0 {
            return Err(domain("reps must be at least 1"));
        }
        if self.n <= self.p {
            return Err(domain(format!(
                "noise variance is estimated by least squares and needs n > p (n={}, p={})",
                self.n, self.p
            )));
        }
        if !(self.rand_ratio > 0.0 && self.rand_ratio.is_finite()) {
            return Err(domain("rand_ratio must be positive"));
        }
        crate::normal::two_sided_z(self.level)?;
        crate::normal::two_sided_z(self.screening_alpha)?;
        if self.lambda_draws == 0 {
            return Err(domain("lambda_draws must be positive"));
        }
        if self.cv_folds < 2 {
            return Err(domain("cv_folds must be at least 2"));
        }
        if self.method == Method::MsSlope && self.target_kind != TargetKind::Partial {
            return Err(domain("the screening-then-SLOPE method supports only the partial target"));
        }
        self.signal.beta(self.p)?;
        Ok(())
    }

    /// Ridge term of the randomized lasso, `1/sqrt(n)`.
    pub fn epsilon(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
}

/// One row of the long-format table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub snr: f64,
    pub metric: &'static str,
    pub method: &'static str,
    pub target: TargetKind,
    pub value: Option<f64>,
}

impl Summary {
    /// Rows `(snr, metric, method, target, value)`, missing values as `None`.
    pub fn long_rows(&self) -> Vec<LongRow> {
        let target = self.config.target_kind;
        let mut rows = Vec::new();
        for c in &self.cells {
            let entries: [(&'static str, &'static str, Option<f64>); 14] = [
                ("coverage", "mle", c.coverage),
                ("coverage", "naive", c.naive_coverage),
                ("length", "mle", c.length),
                ("length", "naive", c.naive_length),
                ("power", "mle", c.power),
                ("fdp", "mle", c.fdp),
                ("risk", "mle", c.risk_mle),
                ("risk", "naive", c.risk_naive),
                ("risk", "randomized_lasso", c.risk_randomized_lasso),
                ("risk", "lasso", c.risk_lasso),
                ("risk", "lasso_cv_min", c.risk_lasso_cv_min),
                ("selected", "mle", Some(c.mean_selected)),
                ("nonempty", "mle", Some(c.nonempty as f64)),
                ("failed", "mle", Some(c.failed as f64)),
            ];
            rows.extend(entries.into_iter().map(|(metric, method, value)| LongRow {
                snr: c.snr,
                metric,
                method,
                target,
                value,
            }));
        }
        rows
    }
}

/// Quantities shared by every replication of an experiment.
struct Population {
    /// Coefficients on the raw `N(0, Sigma)` rows; fixes the noise level.
    beta: Vector,
    /// Coefficients on the design actually passed to the queries, which is
    /// the raw design divided by `sqrt(n)` so columns have roughly unit norm.
    coef: Vector,
    sigma: Matrix,
}

impl Population {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let beta = config.signal.beta(config.p)?;
        Ok(Self {
            coef: &beta * (config.n as f64).sqrt(),
            beta,
            sigma: ar1_cov(config.p, config.rho),
        })
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    let pop = Population::new(config)?;
    let cells = config
        .snr_grid
        .iter()
        .enumerate()
        .map(|(c, &snr)| {
            let sigma2 = snr_to_sigma2(&pop.beta, &pop.sigma, snr)?;
            let reps = run_cell_with(config, &pop, c, sigma2);
            Ok(aggregate(snr, sigma2, &reps))
        })
        .collect::<Result<_>>()?;
    Ok(Summary {
        config: config.clone(),
        cells,
    })
}

/// All replications of SNR cell `cell`, in replication order.
pub fn run_cell(config: &ExperimentConfig, cell: usize) -> Result<Vec<ReplicationSummary>> {
    config.validate()?;
    let snr = *config
        .snr_grid
        .get(cell)
        .ok_or_else(|| domain(format!("no SNR cell {cell}")))?;
    let pop = Population::new(config)?;
    let sigma2 = snr_to_sigma2(&pop.beta, &pop.sigma, snr)?;
    Ok(run_cell_with(config, &pop, cell, sigma2))
}

fn run_cell_with(config: &ExperimentConfig, pop: &Population, cell: usize, sigma2: f64) -> Vec<ReplicationSummary> {
    (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(config.seed, ((cell as u64) << 32) | r as u64);
            replicate(config, pop, sigma2, &mut g)
        })
        .collect()
}

fn canonical_lasso(x: &Matrix, y: &Vector, lambda: f64) -> Result<Vector> {
    let solver = LassoSolver {
        tol: 1e-9,
        ..LassoSolver::default()
    };
    solver.coordinate_descent(x, y, &Vector::zeros(x.ncols()), lambda, 0.0, None)
}

fn embed(p: usize, active: &[usize], v: &Vector) -> Vector {
    let mut out = Vector::zeros(p);
    for (i, &j) in active.iter().enumerate() {
        out[j] = v[i];
    }
    out
}

struct Fitted {
    target: TargetModel,
    result: MleResult,
    randomized_solution: Option<Vector>,
}

fn replicate(config: &ExperimentConfig, pop: &Population, sigma2: f64, g: &mut rng::Rng) -> ReplicationSummary {
    let failed = |e: Error, lambda: f64| {
        let status = match e {
            Error::EmptySelection => RepStatus::Empty,
            Error::Query { ref source, .. } if **source == Error::EmptySelection => RepStatus::Empty,
            other => RepStatus::Failed(other.to_string()),
        };
        ReplicationSummary::without_selection(status, lambda)
    };

    let x = match gen_design(config.n, config.p, config.rho, g) {
        Ok(x) => x / (config.n as f64).sqrt(),
        Err(e) => return failed(e, f64::NAN),
    };
    let mu = &x * &pop.coef;
    let y = &mu + rng::std_normal_vec(g, config.n) * sigma2.sqrt();
    let data = match Dataset::with_estimated_sigma2(x, y) {
        Ok(d) => d,
        Err(e) => return failed(e, f64::NAN),
    };

    let (lambda, cv_min) = match choose_lambda(config, &data, g) {
        Ok(v) => v,
        Err(e) => return failed(e, f64::NAN),
    };
    let seeds: [u64; 2] = [g.random(), g.random()];

    let fitted = match fit(config, &data, lambda, seeds) {
        Ok(f) => f,
        Err(e) => return failed(e, lambda),
    };
    match summarize(config, pop, &data, &mu, lambda, cv_min, fitted) {
        Ok(s) => s,
        Err(e) => failed(e, lambda),
    }
}

fn choose_lambda(config: &ExperimentConfig, data: &Dataset, g: &mut rng::Rng) -> Result<(f64, Option<f64>)> {
    match config.lambda_scheme {
        LambdaScheme::Theory => Ok((lambda_theory(&data.x, data.sigma2, config.lambda_draws, g)?, None)),
        LambdaScheme::CvMin | LambdaScheme::Cv1se => {
            let cv = cross_validate_lambda(&data.x, &data.y, config.cv_folds, g)?;
            let lam = if config.lambda_scheme == LambdaScheme::CvMin { cv.cv_min } else { cv.cv_1se };
            Ok((lam, Some(cv.cv_min)))
        }
    }
}

fn fit(config: &ExperimentConfig, data: &Dataset, lambda: f64, seeds: [u64; 2]) -> Result<Fitted> {
    let eta2 = config.rand_ratio * data.sigma2;
    match config.method {
        Method::Lasso => {
            let rand = RandomizationSpec::isotropic(data.p(), eta2, seeds[0])?;
            let out = solve_randomized_lasso(data, &rand, lambda, config.epsilon())?;
            let target = build_target(data, &out.active, config.target_kind)?;
            let k = kkt(data, &out, &target)?;
            let result = infer(&target, &k, &rand.cov, config.level)?;
            Ok(Fitted {
                target,
                result,
                randomized_solution: Some(out.solution),
            })
        }
        Method::TwoLasso => {
            let r1 = RandomizationSpec::isotropic(data.p(), eta2, seeds[0])?;
            let r2 = RandomizationSpec::isotropic(data.p(), eta2, seeds[1])?;
            let setup = two_lasso_pipeline(data, [&r1, &r2], lambda, config.epsilon(), config.target_kind)?;
            let result = multi_infer(&setup, config.level)?;
            Ok(Fitted {
                target: setup.target,
                result,
                randomized_solution: None,
            })
        }
        Method::MsSlope => {
            let ms_rand = RandomizationSpec::isotropic(data.p(), eta2, seeds[0])?;
            let run = ms_then_slope_pipeline(
                data,
                &ms_rand,
                eta2,
                seeds[1],
                config.screening_alpha,
                &SlopeWeights::Ramp { top: lambda },
            )?;
            let result = multi_infer(&run.setup, config.level)?;
            Ok(Fitted {
                target: run.setup.target,
                result,
                randomized_solution: None,
            })
        }
    }
}

fn summarize(
    config: &ExperimentConfig,
    pop: &Population,
    data: &Dataset,
    mu: &Vector,
    lambda: f64,
    cv_min: Option<f64>,
    fitted: Fitted,
) -> Result<ReplicationSummary> {
    let Fitted {
        target,
        result,
        randomized_solution,
    } = fitted;
    let truth = target.estimand(mu);
    let naive = target.naive_intervals(config.level)?;
    let detected_idx = result.detections();
    let d = target.dim();
    let inside = |iv: (f64, f64), t: f64| iv.0 <= t && t <= iv.1;

    let p = config.p;
    let risk_of = |v: &Vector| relative_risk(v, &pop.coef, &pop.sigma);
    let lasso = canonical_lasso(&data.x, &data.y, lambda)?;
    let lasso_cv_min = match cv_min {
        Some(l) => Some(risk_of(&canonical_lasso(&data.x, &data.y, l)?)),
        None => None,
    };
    let risk = RiskRecord {
        mle: risk_of(&embed(p, &target.active, &result.mle)),
        naive: risk_of(&embed(p, &target.active, &target.beta_hat)),
        randomized_lasso: randomized_solution.as_ref().map(&risk_of),
        lasso: risk_of(&lasso),
        lasso_cv_min,
    };

    Ok(ReplicationSummary {
        status: RepStatus::Selected,
        lambda,
        selected: target.active.clone(),
        covered: (0..d).map(|j| inside(result.intervals[j], truth[j])).collect(),
        lengths: result.intervals.iter().map(|iv| iv.1 - iv.0).collect(),
        naive_covered: (0..d).map(|j| inside(naive[j], truth[j])).collect(),
        naive_lengths: naive.iter().map(|iv| iv.1 - iv.0).collect(),
        detected: (0..d).map(|j| detected_idx.contains(&j)).collect(),
        true_signal: target.active.iter().map(|&j| pop.coef[j] != 0.0).collect(),
        risk: Some(risk),
    })
}
