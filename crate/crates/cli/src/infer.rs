//! `selinf infer`: one query (or pipeline) on user data.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use selinf::linalg::Vector;
use selinf::mle::{infer, MleResult};
use selinf::multi::{ms_then_slope_pipeline, multi_infer, slope_ramp, two_lasso_pipeline, SlopeWeights};
use selinf::queries::{
    build_target, kkt, ols_sigma2, solve_marginal_screening, solve_randomized_lasso, solve_randomized_slope,
    Dataset, RandomizationSpec, TargetKind, TargetModel,
};
use selinf::rng;
use selinf::simulation::{cross_validate_lambda, lambda_theory, LambdaScheme};

use crate::data::{read_csv, standardize};
use crate::{emit, to_json, CliResult, Failure, RunManifest, SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Lasso,
    Screening,
    Slope,
    /// Two independently randomized lassos.
    Lasso2,
    /// Marginal screening, then SLOPE on the screened columns.
    MsSlope,
}

impl QueryKind {
    fn uses_lambda(self) -> bool {
        self != Self::Screening
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Scheme(LambdaScheme),
    Value(f64),
}

impl std::str::FromStr for LambdaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(scheme) = s.parse::<LambdaScheme>() {
            return Ok(Self::Scheme(scheme));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Self::Value(v)),
            _ => Err(format!("'{s}' is not theory, cv.min, cv.1se or a positive number")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column; all other columns are predictors.
    #[arg(long)]
    pub response: String,
    #[arg(long, value_enum, default_value = "lasso")]
    pub query: QueryKind,
    /// theory, cv.min, cv.1se or a positive value.
    #[arg(long, default_value = "theory")]
    pub lambda: LambdaChoice,
    /// Randomization variance over noise variance.
    #[arg(long, default_value_t = 0.5)]
    pub rand_ratio: f64,
    /// Intervals have coverage `1 - level`.
    #[arg(long, default_value_t = 0.1)]
    pub level: f64,
    #[arg(long, default_value = "partial")]
    pub target: TargetKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Use the data as given instead of centering and scaling to unit norm.
    #[arg(long)]
    pub no_standardize: bool,
    /// Known noise variance; estimated by least squares otherwise.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Level of the marginal screening query.
    #[arg(long, default_value_t = 0.1)]
    pub screening_alpha: f64,
    /// Monte-Carlo draws for the theoretical lambda.
    #[arg(long, default_value_t = 500)]
    pub lambda_draws: usize,
    #[arg(long, default_value_t = 10)]
    pub cv_folds: usize,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Settings of the selection and inference step, independent of I/O.
#[derive(Debug, Clone, Serialize)]
pub struct QueryOptions {
    pub query: QueryKind,
    pub lambda: LambdaChoice,
    pub rand_ratio: f64,
    pub level: f64,
    pub target: TargetKind,
    pub seed: u64,
    pub screening_alpha: f64,
    pub lambda_draws: usize,
    pub cv_folds: usize,
}

impl From<&InferArgs> for QueryOptions {
    fn from(a: &InferArgs) -> Self {
        Self {
            query: a.query,
            lambda: a.lambda,
            rand_ratio: a.rand_ratio,
            level: a.level,
            target: a.target,
            seed: a.seed,
            screening_alpha: a.screening_alpha,
            lambda_draws: a.lambda_draws,
            cv_folds: a.cv_folds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QueryFit {
    pub target: TargetModel,
    pub result: MleResult,
    pub lambda: Option<f64>,
    pub eta2: f64,
    pub epsilon: f64,
}

/// Tuning draws come from stream 0 of the seed; query `l` is randomized with
/// seed `rng::derive_seed(seed, l + 1)`.
pub fn fit_query(data: &Dataset, opts: &QueryOptions) -> selinf::Result<QueryFit> {
    let p = data.p();
    let eta2 = opts.rand_ratio * data.sigma2;
    let epsilon = 1.0 / (data.n() as f64).sqrt();
    let seeds = [rng::derive_seed(opts.seed, 1), rng::derive_seed(opts.seed, 2)];
    let lambda = if opts.query.uses_lambda() {
        let mut g = rng::stream(opts.seed, 0);
        Some(match opts.lambda {
            LambdaChoice::Value(v) => v,
            LambdaChoice::Scheme(LambdaScheme::Theory) => lambda_theory(&data.x, data.sigma2, opts.lambda_draws, &mut g)?,
            LambdaChoice::Scheme(LambdaScheme::CvMin) => cross_validate_lambda(&data.x, &data.y, opts.cv_folds, &mut g)?.cv_min,
            LambdaChoice::Scheme(LambdaScheme::Cv1se) => cross_validate_lambda(&data.x, &data.y, opts.cv_folds, &mut g)?.cv_1se,
        })
    } else {
        None
    };
    let lam = lambda.unwrap_or(f64::NAN);

    let single = |outcome: selinf::queries::SelectionOutcome, rand: RandomizationSpec| -> selinf::Result<_> {
        let target = build_target(data, &outcome.active, opts.target)?;
        let k = kkt(data, &outcome, &target)?;
        let result = infer(&target, &k, &rand.cov, opts.level)?;
        Ok((target, result))
    };
    let (target, result) = match opts.query {
        QueryKind::Lasso => {
            let rand = RandomizationSpec::isotropic(p, eta2, seeds[0])?;
            single(solve_randomized_lasso(data, &rand, lam, epsilon)?, rand)?
        }
        QueryKind::Screening => {
            let rand = RandomizationSpec::isotropic(p, eta2, seeds[0])?;
            single(solve_marginal_screening(data, &rand, opts.screening_alpha)?, rand)?
        }
        QueryKind::Slope => {
            let rand = RandomizationSpec::isotropic(p, eta2, seeds[0])?;
            single(solve_randomized_slope(data, &rand, &slope_ramp(p, lam))?, rand)?
        }
        QueryKind::Lasso2 => {
            let r1 = RandomizationSpec::isotropic(p, eta2, seeds[0])?;
            let r2 = RandomizationSpec::isotropic(p, eta2, seeds[1])?;
            let setup = two_lasso_pipeline(data, [&r1, &r2], lam, epsilon, opts.target)?;
            let result = multi_infer(&setup, opts.level)?;
            (setup.target, result)
        }
        QueryKind::MsSlope => {
            if opts.target != TargetKind::Partial {
                return Err(selinf::Error::Domain("ms-slope supports only the partial target".into()));
            }
            let ms = RandomizationSpec::isotropic(p, eta2, seeds[0])?;
            let run = ms_then_slope_pipeline(
                data,
                &ms,
                eta2,
                seeds[1],
                opts.screening_alpha,
                &SlopeWeights::Ramp { top: lam },
            )?;
            let result = multi_infer(&run.setup, opts.level)?;
            (run.setup.target, result)
        }
    };
    Ok(QueryFit {
        target,
        result,
        lambda,
        eta2,
        epsilon,
    })
}

#[derive(Debug, Serialize)]
pub struct SelectedVariable {
    pub name: String,
    /// Position among the predictor columns.
    pub column: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub naive_estimate: f64,
    pub naive_lower: f64,
    pub naive_upper: f64,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub barrier_iterations: usize,
    pub barrier_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct InferConfig {
    pub response: String,
    pub standardize: bool,
    pub sigma2: Option<f64>,
    #[serde(flatten)]
    pub query: QueryOptions,
}

#[derive(Debug, Serialize)]
pub struct InferReport {
    pub schema: &'static str,
    pub manifest: RunManifest<InferConfig>,
    pub n: usize,
    pub p: usize,
    pub sigma2: f64,
    pub eta2: f64,
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub target: TargetKind,
    pub level: f64,
    pub selected: Vec<SelectedVariable>,
    pub diagnostics: Diagnostics,
}

/// Least-squares noise variance, with one extra degree of freedom spent on
/// the intercept when the data were centered.
fn estimate_sigma2(data_x: &selinf::linalg::Matrix, y: &Vector, centered: bool) -> CliResult<f64> {
    let (n, p) = data_x.shape();
    let spent = p + usize::from(centered);
    if n <= spent {
        return Err(Failure::usage(format!(
            "cannot estimate the noise variance with n={n} rows and p={p} predictors; pass --sigma2"
        )));
    }
    let s2 = ols_sigma2(data_x, y)?;
    Ok(if centered { s2 * (n - p) as f64 / (n - spent) as f64 } else { s2 })
}

pub fn build_report(args: &InferArgs) -> CliResult<InferReport> {
    let table = read_csv(&args.data, &args.response)?;
    let (x, y) = if args.no_standardize {
        (table.x.clone(), table.y.clone())
    } else {
        standardize(&table.x, &table.y)?
    };
    let (n, p) = x.shape();
    if args.target == TargetKind::Full && n <= p {
        return Err(Failure::usage(format!("the full target needs n > p (n={n}, p={p})")));
    }
    let sigma2 = match args.sigma2 {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Failure::usage(format!("--sigma2 must be positive, got {s}"))),
        None => estimate_sigma2(&x, &y, !args.no_standardize)?,
    };
    let data = Dataset::new(x, y, sigma2)?;
    let opts = QueryOptions::from(args);
    let fit = fit_query(&data, &opts)?;

    let naive = fit.target.naive_intervals(opts.level)?;
    let r = &fit.result;
    let selected = fit
        .target
        .active
        .iter()
        .enumerate()
        .map(|(i, &j)| SelectedVariable {
            name: table.predictors[j].clone(),
            column: j,
            estimate: r.mle[i],
            std_error: r.std_errors[i],
            p_value: r.pvalues[i],
            lower: r.intervals[i].0,
            upper: r.intervals[i].1,
            naive_estimate: fit.target.beta_hat[i],
            naive_lower: naive[i].0,
            naive_upper: naive[i].1,
        })
        .collect();

    let mut manifest = RunManifest::new(
        "infer",
        args.seed,
        InferConfig {
            response: args.response.clone(),
            standardize: !args.no_standardize,
            sigma2: args.sigma2,
            query: opts.clone(),
        },
    );
    manifest.inputs.push(args.data.display().to_string());
    manifest.outputs.extend(args.output.iter().map(|o| o.display().to_string()));

    Ok(InferReport {
        schema: SCHEMA,
        manifest,
        n,
        p,
        sigma2,
        eta2: fit.eta2,
        lambda: fit.lambda,
        epsilon: fit.epsilon,
        target: fit.target.kind,
        level: opts.level,
        selected,
        diagnostics: Diagnostics {
            barrier_iterations: r.diagnostics.barrier_iterations,
            barrier_residual: r.diagnostics.barrier_residual,
        },
    })
}

pub fn run(args: &InferArgs) -> CliResult<()> {
    let report = build_report(args)?;
    emit(args.output.as_deref(), &to_json(&report)?)
}
