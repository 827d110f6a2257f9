//! Replication metrics and the study report.

use super::config::StudyConfig;
use crate::estimators::Method;
use crate::levy::CogarchParams;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const COMPONENTS: [&str; 3] = ["beta", "eta", "phi"];

/// Mean, standard deviation (divisor = number of replications), root mean
/// squared error and relative bias of one estimator, per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub rmse: [f64; 3],
    pub rb: [f64; 3],
}

/// `(mean, std, rmse, rb)` of `values` about `truth`.
pub fn component_metrics(values: &[f64], truth: f64) -> (f64, f64, f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
    let (rmse, rb) = rmse_rb(mean, std, truth);
    (mean, std, rmse, rb)
}

/// `RMSE = √(Std² + (mean - truth)²)`, `RB = (mean - truth)/truth`.
pub fn rmse_rb(mean: f64, std: f64, truth: f64) -> (f64, f64) {
    let bias = mean - truth;
    ((std * std + bias * bias).sqrt(), bias / truth)
}

pub fn method_row(method: Method, estimates: &[CogarchParams], truth: &CogarchParams) -> MethodRow {
    let t = truth.to_array();
    let mut row = MethodRow {
        method,
        mean: [0.0; 3],
        std: [0.0; 3],
        rmse: [0.0; 3],
        rb: [0.0; 3],
    };
    for c in 0..3 {
        let values: Vec<f64> = estimates.iter().map(|e| e.to_array()[c]).collect();
        let (mean, std, rmse, rb) = component_metrics(&values, t[c]);
        row.mean[c] = mean;
        row.std[c] = std;
        row.rmse[c] = rmse;
        row.rb[c] = rb;
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    /// `<method>.<component>`.
    pub component: String,
    pub theoretical_quantile: f64,
    pub sample_quantile: f64,
}

/// Sorted sample against standard normal quantiles at `(i - ½)/m`.
pub fn qq_rows(label: &str, values: &[f64]) -> Vec<QqRow> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| QqRow {
            component: label.to_string(),
            theoretical_quantile: normal.inverse_cdf((i as f64 + 0.5) / m),
            sample_quantile: v,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepEstimate {
    pub rep: usize,
    pub method: Method,
    pub theta: Option<CogarchParams>,
    pub objective: Option<f64>,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub points: usize,
    pub filtered: usize,
    pub axis_counts: [usize; 3],
    pub spacing: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    /// Standard deviations use the population convention (divisor = number
    /// of included replications).
    pub std_convention: String,
    pub reps: usize,
    pub included: usize,
    pub excluded: usize,
    pub excluded_reps: Vec<usize>,
    pub rows: Vec<MethodRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    pub estimates: Vec<RepEstimate>,
    pub qq: Vec<QqRow>,
}

impl StudyReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}
