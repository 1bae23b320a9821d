//! `selinf simulate`: run an experiment and write its summary.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use selinf::queries::TargetKind;
use selinf::simulation::{run_experiment, ExperimentConfig, LambdaScheme, Method, Signal, Summary};

use crate::{to_json, write_file, CliResult, Failure, RunManifest, SCHEMA};

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary_long.csv";

/// `type4` or `flat:S:AMPLITUDE`.
pub fn parse_signal(s: &str) -> Result<Signal, String> {
    if s == "type4" {
        return Ok(Signal::Type4);
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["flat", k, a] => {
            let s = k.parse().map_err(|_| format!("bad sparsity '{k}'"))?;
            let amplitude = a.parse().map_err(|_| format!("bad amplitude '{a}'"))?;
            Ok(Signal::Flat { s, amplitude })
        }
        _ => Err(format!("'{s}' is not type4 or flat:S:AMPLITUDE")),
    }
}

/// Comma-separated SNR values.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrGrid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<SnrGrid, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad SNR value '{v}'")))
        .collect::<Result<_, _>>()
        .map(SnrGrid)
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for summary.json and summary_long.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// type4 or flat:S:AMPLITUDE.
    #[arg(long, value_parser = parse_signal)]
    pub signal: Option<Signal>,
    /// Comma-separated SNR values.
    #[arg(long, value_parser = parse_grid)]
    pub snr: Option<SnrGrid>,
    /// theory, cv.min or cv.1se.
    #[arg(long)]
    pub lambda: Option<LambdaScheme>,
    #[arg(long)]
    pub rand_ratio: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub target: Option<TargetKind>,
    /// lasso, two-lasso or ms-slope.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub screening_alpha: Option<f64>,
}

impl SimulateArgs {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| Failure::io(path, e))?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = &self.$field { c.$target = v.clone(); })*
            };
        }
        set!(n => n, p => p, rho => rho, signal => signal, lambda => lambda_scheme,
             rand_ratio => rand_ratio, reps => reps, seed => seed, target => target_kind,
             method => method, level => level, screening_alpha => screening_alpha);
        if let Some(grid) = &self.snr {
            c.snr_grid = grid.0.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub schema: &'static str,
    pub manifest: RunManifest<ExperimentConfig>,
    pub summary: Summary,
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Long table with columns `snr, metric, method, target, value`.
pub fn long_csv(summary: &Summary) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Failure::Internal(e.to_string());
    w.write_record(["snr", "metric", "method", "target", "value"]).map_err(internal)?;
    for row in summary.long_rows() {
        let target = match row.target {
            TargetKind::Partial => "partial",
            TargetKind::Full => "full",
        };
        w.write_record([row.snr.to_string().as_str(), row.metric, row.method, target, &fmt_value(row.value)])
            .map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Internal(e.to_string()))
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let config = args.resolve()?;
    let summary = run_experiment(&config)?;
    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let json_path = out.join(SUMMARY_JSON);
    let csv_path = out.join(SUMMARY_CSV);

    let mut manifest = RunManifest::new("simulate", config.seed, config);
    manifest.inputs.extend(args.config.iter().map(|p| p.display().to_string()));
    manifest.outputs = [&json_path, &csv_path].iter().map(|p| p.display().to_string()).collect();
    let report = SimulateReport {
        schema: SCHEMA,
        manifest,
        summary,
    };
    write_file(&json_path, &to_json(&report)?)?;
    write_file(&csv_path, &long_csv(&report.summary)?)?;
    Ok(())
}
