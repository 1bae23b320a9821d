//! `selinf pivot-check`: Monte-Carlo uniformity of the file-drawer pivot.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use selinf::filedrawer::FileDrawerProblem;
use selinf::stats::{ecdf, ks_uniform};

use crate::{emit, to_json, write_file, CliResult, Failure, RunManifest, SCHEMA};

#[derive(Debug, Clone, Args, Serialize)]
pub struct PivotArgs {
    /// True mean of the observation.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Selection threshold.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tau: f64,
    /// Randomization variance.
    #[arg(long, default_value_t = 1.0)]
    pub eta2: f64,
    /// Number of selected draws.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// KS significance level for the pass flag.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// ECDF CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct PivotReport {
    pub schema: &'static str,
    pub manifest: RunManifest<PivotArgs>,
    pub draws: usize,
    pub attempts: u64,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub passes: bool,
}

/// Pivots of `draws` selected observations, in draw order.
pub fn pivots(args: &PivotArgs) -> CliResult<(Vec<f64>, u64)> {
    if args.draws == 0 {
        return Err(Failure::usage("--draws must be at least 1"));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Failure::usage("--alpha must lie in (0, 1)"));
    }
    let prob = FileDrawerProblem::new(args.tau, args.eta2)?;
    let sample = prob.sample_selected(args.beta, args.draws, args.seed)?;
    let pivots = sample
        .ys
        .par_iter()
        .map(|&y| prob.pivot(y, args.beta))
        .collect::<selinf::Result<Vec<f64>>>()?;
    Ok((pivots, sample.attempts))
}

pub fn ecdf_csv(pivots: &[f64]) -> String {
    let mut s = String::from("pivot,ecdf\n");
    for (x, f) in ecdf(pivots) {
        s.push_str(&format!("{x},{f}\n"));
    }
    s
}

pub fn run(args: &PivotArgs) -> CliResult<()> {
    let (pv, attempts) = pivots(args)?;
    let ks = ks_uniform(&pv);
    let mut manifest = RunManifest::new("pivot-check", args.seed, args.clone());
    manifest.outputs = args.out.iter().chain(&args.report).map(|p| p.display().to_string()).collect();
    if let Some(path) = &args.out {
        write_file(path, &ecdf_csv(&pv))?;
    }
    let report = PivotReport {
        schema: SCHEMA,
        manifest,
        draws: pv.len(),
        attempts,
        ks_statistic: ks.statistic,
        ks_pvalue: ks.pvalue,
        passes: ks.passes(args.alpha),
    };
    emit(args.report.as_deref(), &to_json(&report)?)
}
