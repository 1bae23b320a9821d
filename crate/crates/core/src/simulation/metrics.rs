//! Per-replication records and their aggregation.

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};

/// `(est - beta)' Sigma (est - beta) / beta' Sigma beta`.
pub fn relative_risk(estimate: &Vector, beta: &Vector, sigma: &Matrix) -> f64 {
    let d = estimate - beta;
    d.dot(&(sigma * &d)) / beta.dot(&(sigma * beta))
}

/// Relative risks of the point estimates compared in one replication.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub mle: f64,
    /// Unadjusted least squares on the selected set.
    pub naive: f64,
    /// The randomized query's own solution (single-lasso runs only).
    pub randomized_lasso: Option<f64>,
    /// Canonical lasso at the query's lambda.
    pub lasso: f64,
    /// Canonical lasso at the cross-validated minimum, when CV was run.
    pub lasso_cv_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "message")]
pub enum RepStatus {
    Selected,
    Empty,
    Failed(String),
}

/// Raw outcome of one replication. Vectors are indexed by the selected set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub status: RepStatus,
    pub lambda: f64,
    pub selected: Vec<usize>,
    pub covered: Vec<bool>,
    pub lengths: Vec<f64>,
    pub naive_covered: Vec<bool>,
    pub naive_lengths: Vec<f64>,
    /// Interval excludes zero.
    pub detected: Vec<bool>,
    /// Selected variable has a nonzero true coefficient.
    pub true_signal: Vec<bool>,
    pub risk: Option<RiskRecord>,
}

impl ReplicationSummary {
    pub fn without_selection(status: RepStatus, lambda: f64) -> Self {
        Self {
            status,
            lambda,
            selected: Vec::new(),
            covered: Vec::new(),
            lengths: Vec::new(),
            naive_covered: Vec::new(),
            naive_lengths: Vec::new(),
            detected: Vec::new(),
            true_signal: Vec::new(),
            risk: None,
        }
    }

    pub fn has_selection(&self) -> bool {
        self.status == RepStatus::Selected && !self.selected.is_empty()
    }

    fn frac(flags: &[bool]) -> f64 {
        flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
    }

    fn avg(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    pub fn coverage(&self) -> f64 {
        Self::frac(&self.covered)
    }

    pub fn naive_coverage(&self) -> f64 {
        Self::frac(&self.naive_covered)
    }

    pub fn mean_length(&self) -> f64 {
        Self::avg(&self.lengths)
    }

    pub fn mean_naive_length(&self) -> f64 {
        Self::avg(&self.naive_lengths)
    }

    /// Detected true signals over selected true signals; `None` without any.
    pub fn power(&self) -> Option<f64> {
        let screened = self.true_signal.iter().filter(|&&t| t).count();
        (screened > 0).then(|| {
            let hits = self.detected.iter().zip(&self.true_signal).filter(|(&d, &t)| d && t).count();
            hits as f64 / screened as f64
        })
    }

    /// False detections over detections, zero when nothing is detected.
    pub fn fdp(&self) -> f64 {
        let det = self.detected.iter().filter(|&&d| d).count();
        if det == 0 {
            return 0.0;
        }
        let false_det = self.detected.iter().zip(&self.true_signal).filter(|(&d, &t)| d && !t).count();
        false_det as f64 / det as f64
    }
}

/// Aggregates for one SNR value. `None` marks a metric with no data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub snr: f64,
    pub sigma2: f64,
    pub reps: usize,
    pub nonempty: usize,
    pub failed: usize,
    pub mean_selected: f64,
    pub mean_lambda: f64,
    pub coverage: Option<f64>,
    pub naive_coverage: Option<f64>,
    pub length: Option<f64>,
    pub naive_length: Option<f64>,
    pub power: Option<f64>,
    pub fdp: Option<f64>,
    pub risk_mle: Option<f64>,
    pub risk_naive: Option<f64>,
    pub risk_randomized_lasso: Option<f64>,
    pub risk_lasso: Option<f64>,
    pub risk_lasso_cv_min: Option<f64>,
}

#[derive(Default)]
struct Acc {
    sum: f64,
    count: usize,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Averages per-replication metrics across replications, in order.
pub fn aggregate(snr: f64, sigma2: f64, reps: &[ReplicationSummary]) -> CellSummary {
    let mut a: [Acc; 13] = Default::default();
    let mut failed = 0;
    for r in reps {
        a[0].push(r.selected.len() as f64);
        a[1].push(r.lambda);
        if let RepStatus::Failed(_) = r.status {
            failed += 1;
        }
        if !r.has_selection() {
            continue;
        }
        a[2].push(r.coverage());
        a[3].push(r.naive_coverage());
        a[4].push(r.mean_length());
        a[5].push(r.mean_naive_length());
        if let Some(p) = r.power() {
            a[6].push(p);
        }
        a[7].push(r.fdp());
        if let Some(risk) = &r.risk {
            a[8].push(risk.mle);
            a[9].push(risk.naive);
            if let Some(v) = risk.randomized_lasso {
                a[10].push(v);
            }
            a[11].push(risk.lasso);
            if let Some(v) = risk.lasso_cv_min {
                a[12].push(v);
            }
        }
    }
    CellSummary {
        snr,
        sigma2,
        reps: reps.len(),
        nonempty: a[2].count,
        failed,
        mean_selected: a[0].mean().unwrap_or(0.0),
        mean_lambda: a[1].mean().unwrap_or(f64::NAN),
        coverage: a[2].mean(),
        naive_coverage: a[3].mean(),
        length: a[4].mean(),
        naive_length: a[5].mean(),
        power: a[6].mean(),
        fdp: a[7].mean(),
        risk_mle: a[8].mean(),
        risk_naive: a[9].mean(),
        risk_randomized_lasso: a[10].mean(),
        risk_lasso: a[11].mean(),
        risk_lasso_cv_min: a[12].mean(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_endpoints() {
        let s = Matrix::identity(2, 2);
        let b = Vector::from_vec(vec![1.0, -2.0]);
        assert_eq!(relative_risk(&b, &b, &s), 0.0);
        assert_eq!(relative_risk(&Vector::zeros(2), &b, &s), 1.0);
    }

    #[test]
    fn empty_cells_are_missing() {
        let reps = vec![ReplicationSummary::without_selection(RepStatus::Empty, 1.0)];
        let c = aggregate(0.5, 1.0, &reps);
        assert_eq!(c.coverage, None);
        assert_eq!(c.power, None);
        assert_eq!(c.nonempty, 0);
    }
}
