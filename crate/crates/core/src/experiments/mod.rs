//! Seeded simulations and bound checks. Every experiment reads a JSON
//! config (missing fields take defaults), runs from a master seed and
//! returns a table plus the list of asserted bounds it found violated.

mod concentration;
mod config;
mod consistency;
mod dgkl;
mod geometry;
mod lb;
mod output;
mod prop12;
mod schedule;

pub use concentration::{deviation_concentration, mcdiarmid_bound, ConcentrationConfig};
pub use config::{two_gaussians_components, AtomConfig, ModelConfig, ProblemConfig, RegionSpec, DEFAULT_ORACLE_SAMPLES};
pub use consistency::{
    conditional_error, log_grid, strong_consistency_path, weak_consistency_run, StrongConfig, WeakConfig,
};
pub use dgkl::{dgkl_bound_sweep, DgklConfig};
pub use geometry::{koranyi_run, KoranyiConfig};
pub use lb::{ball_average_eta, lb_differentiation_check, LbConfig};
pub use output::{input_hash, sha256_hex, write_artifacts, Table, Value};
pub use prop12::{prop12_counterexample, Prop12Config};
pub use schedule::{
    any_below_probability, binomial_lower_tail, k_at_checkpoint, Checkpoint, CounterexampleSchedule, KSchedule,
    Schedule,
};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::balls::GeometryError;
use crate::knn::KnnError;
use crate::measure::MeasureError;
use crate::metric::MetricError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("could not certify the counterexample schedule at checkpoint {i}")]
    Schedule { i: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Errors that stem from the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_) | ExperimentError::Json(_) | ExperimentError::Schedule { .. }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub seed: u64,
    /// Fully resolved config.
    pub config: serde_json::Value,
    pub table: Table,
    /// Asserted bounds that failed; empty on a clean run.
    pub violations: Vec<String>,
    pub summary: serde_json::Value,
}

/// Names and one-line descriptions, in a fixed order.
pub const EXPERIMENTS: [(&str, &str); 7] = [
    ("weak-consistency", "mean k-NN test error against the Bayes error over a grid of sample sizes"),
    ("strong-path", "k-NN error along one growing sample path"),
    ("prop12", "tie-breaking counterexample: wrong unanimous votes at certified checkpoints"),
    ("lb-check", "mass of points where ball averages of eta stay far from eta"),
    ("dgkl-sweep", "measure of D(x,z,alpha) against 4 alpha(1 - ln alpha) over an alpha grid"),
    ("concentration", "tail of the conditional k-NN deviation against the exponential bound"),
    ("koranyi", "disconnected family of Heisenberg balls sharing the identity"),
];

pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    EXPERIMENTS.to_vec()
}

fn parse<T: DeserializeOwned>(params: serde_json::Value) -> Result<T, ExperimentError> {
    let params = if params.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        params
    };
    serde_json::from_value(params).map_err(|e| ExperimentError::Config(e.to_string()))
}

/// Runs experiment `name` with `params` (a JSON object; `null` means all
/// defaults).
pub fn run_experiment(name: &str, params: serde_json::Value, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    match name {
        "weak-consistency" => weak_consistency_run(&parse(params)?, seed),
        "strong-path" => strong_consistency_path(&parse(params)?, seed),
        "prop12" => prop12_counterexample(&parse(params)?, seed),
        "lb-check" => lb_differentiation_check(&parse(params)?, seed),
        "dgkl-sweep" => dgkl_bound_sweep(&parse(params)?, seed),
        "concentration" => deviation_concentration(&parse(params)?, seed),
        "koranyi" => koranyi_run(&parse(params)?, seed),
        other => Err(ExperimentError::Config(format!(
            "unknown experiment `{other}`; known: {}",
            EXPERIMENTS.map(|e| e.0).join(", ")
        ))),
    }
}

pub(crate) fn finish<C: Serialize>(
    experiment: &str,
    seed: u64,
    config: &C,
    table: Table,
    violations: Vec<String>,
    summary: serde_json::Value,
) -> Result<ExperimentResult, ExperimentError> {
    Ok(ExperimentResult {
        experiment: experiment.into(),
        seed,
        config: serde_json::to_value(config)?,
        table,
        violations,
        summary,
    })
}

/// Parses `"0.1,0.05"`, a single number, or a geometric range
/// `"2^-3..2^-10"` (every integer exponent in between).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::Config(format!("cannot parse grid `{text}`"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let power = |s: &str| -> Result<(f64, i32), ExperimentError> {
            let (base, exp) = s.trim().split_once('^').ok_or_else(bad)?;
            Ok((base.parse().map_err(|_| bad())?, exp.parse().map_err(|_| bad())?))
        };
        let (b0, e0) = power(a)?;
        let (b1, e1) = power(b)?;
        if b0 != b1 || !(b0 > 0.0) {
            return Err(bad());
        }
        let step = if e1 >= e0 { 1 } else { -1 };
        let mut out = Vec::new();
        let mut e = e0;
        loop {
            out.push(b0.powi(e));
            if e == e1 {
                break;
            }
            e += step;
        }
        return Ok(out);
    }
    let out: Vec<f64> = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.split_once('^') {
                Some((b, e)) => Ok(b.parse::<f64>().map_err(|_| bad())?.powi(e.parse().map_err(|_| bad())?)),
                None => s.parse::<f64>().map_err(|_| bad()),
            }
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Standard error of a sample mean.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
