//! Measure of `D(x, z, α)` over an α grid, against `4α(1 - ln α)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, DEFAULT_ORACLE_SAMPLES};
use super::{finish, ExperimentError, ExperimentResult, Table};
use crate::measure::{d_measure_estimate, d_measure_exact, d_measure_bound, nested_d_lower_bound, ProbabilityModel};
use crate::metric::Point;
use crate::rng::{derive_seed, labeled_stream};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgklConfig {
    pub model: ModelConfig,
    pub alphas: Vec<f64>,
    /// Random `(x, z)` pairs per α.
    pub points: usize,
    /// Monte-Carlo draws per estimate.
    pub samples: usize,
    pub oracle_samples: usize,
}

impl Default for DgklConfig {
    fn default() -> Self {
        DgklConfig {
            model: ModelConfig::Nested {},
            alphas: (3..=10).map(|e| 2f64.powi(-e)).collect(),
            points: 20,
            samples: 100_000,
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
        }
    }
}

pub fn dgkl_bound_sweep(cfg: &DgklConfig, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    if cfg.alphas.is_empty() || cfg.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(ExperimentError::Config("alphas must be a nonempty list in (0,1)".into()));
    }
    if cfg.points == 0 || cfg.samples == 0 {
        return Err(ExperimentError::Config("points and samples must be at least 1".into()));
    }
    let model = cfg.model.build(seed, cfg.oracle_samples)?;
    let ultrametric = model.space().is_ultrametric();
    let nested = matches!(model, ProbabilityModel::Nested(_));
    let mut rng = labeled_stream(seed, "dgkl-points", 0);
    let pairs: Vec<(Point, f64)> = (0..cfg.points)
        .map(|_| (model.sample(&mut rng), rng.random::<f64>()))
        .collect();

    let mut table = Table::new(&[
        "alpha",
        "d_measure",
        "stderr",
        "bound_4a",
        "exact_lower",
        "d_max",
        "d_max_stderr",
        "ratio",
        "exact_d_x0",
        "exact_ratio",
    ]);
    let mut violations = Vec::new();
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        let bound = d_measure_bound(alpha);
        let mut sum = 0.0;
        let mut var = 0.0;
        let mut max = (f64::NEG_INFINITY, 0.0);
        for (j, (x, z)) in pairs.iter().enumerate() {
            let s = derive_seed(seed, ((ai as u64) << 32) | j as u64);
            let e = d_measure_estimate(&model, x, *z, alpha, cfg.samples, s)?;
            sum += e.value;
            var += e.stderr * e.stderr;
            if e.value > max.0 {
                max = (e.value, e.stderr);
            }
            if ultrametric && e.value > bound + 3.0 * e.stderr {
                violations.push(format!(
                    "alpha={alpha}: estimate {} at x={} z={z} exceeds {bound} by more than 3 sigma",
                    e.value,
                    x.render()
                ));
            }
        }
        let n = cfg.points as f64;
        let mean = sum / n;
        let (exact_lower, exact_x0) = if nested {
            let lower = nested_d_lower_bound(alpha).map(|b| b.exact).unwrap_or(f64::NAN);
            (lower, d_measure_exact(&model, &Point::nested(0), 0.0, alpha)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        table.push(vec![
            alpha.into(),
            mean.into(),
            (var.sqrt() / n).into(),
            bound.into(),
            exact_lower.into(),
            max.0.into(),
            max.1.into(),
            (mean / alpha).into(),
            exact_x0.into(),
            (exact_x0 / alpha).into(),
        ]);
    }
    let summary = serde_json::json!({ "model": model.name(), "ultrametric": ultrametric });
    finish("dgkl-sweep", seed, cfg, table, violations, summary)
}
