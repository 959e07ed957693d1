//! Test error of the k-NN rule: over independent trials at a grid of
//! sample sizes, and along a single growing sample path.
//!
//! The error of a fitted rule `g` is estimated by `E[P(Y ≠ g(X) | X)]`
//! over a fresh test set, i.e. `η(X)` where `g` says 0 and `1 - η(X)`
//! where it says 1.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ProblemConfig, DEFAULT_ORACLE_SAMPLES};
use super::schedule::Schedule;
use super::{finish, mean_and_stderr, ExperimentError, ExperimentResult, Table};
use crate::knn::{predict, LabeledSample, TieBreakPolicy};
use crate::measure::{bayes_error, BayesMethod, Estimate, LearningProblem};
use crate::metric::Point;
use crate::rng::{derive_seed, labeled_stream};

/// Per-test-point error `P(Y ≠ g(x) | X = x)` of the k-NN rule on `sample`.
/// Test pairs carry the query's tie-break value (used by DGKL only; the
/// uniform-random policy queries with 0).
pub fn conditional_error(
    problem: &LearningProblem,
    sample: &LabeledSample,
    test: &[(Point, f64)],
    k: usize,
    policy: TieBreakPolicy,
) -> Result<Vec<f64>, ExperimentError> {
    test.par_iter()
        .map(|(x, z)| {
            let qz = match policy {
                TieBreakPolicy::Dgkl => *z,
                _ => 0.0,
            };
            let g = predict(sample, x, k, policy, qz)?;
            let eta = problem.eta(x);
            Ok(if g == 1 { 1.0 - eta } else { eta })
        })
        .collect()
}

fn test_set(problem: &LearningProblem, seed: u64, index: u64, size: usize) -> Vec<(Point, f64)> {
    let mut rng = labeled_stream(seed, "test", index);
    (0..size)
        .map(|_| {
            let x = problem.model.sample(&mut rng);
            (x, rng.random::<f64>())
        })
        .collect()
}

pub(crate) fn bayes_reference(problem: &LearningProblem, samples: usize, seed: u64) -> Result<Estimate, ExperimentError> {
    match bayes_error(problem, BayesMethod::Quadrature) {
        Ok(e) => Ok(e),
        Err(crate::measure::MeasureError::QuadratureUnavailable(_)) => Ok(bayes_error(
            problem,
            BayesMethod::MonteCarlo {
                samples,
                seed: derive_seed(seed, 0x62_6179_6573),
            },
        )?),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakConfig {
    pub problem: ProblemConfig,
    pub schedule: Schedule,
    pub n_grid: Vec<usize>,
    pub test_size: usize,
    pub trials: usize,
    pub policy: TieBreakPolicy,
    pub oracle_samples: usize,
    /// Monte-Carlo size for the Bayes error when no quadrature applies.
    pub bayes_samples: usize,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            problem: ProblemConfig::new(ModelConfig::TwoGaussians {}),
            schedule: Schedule::Sqrt,
            n_grid: vec![250, 500, 1000, 2000, 4000],
            test_size: 2000,
            trials: 20,
            policy: TieBreakPolicy::ByIndex,
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
            bayes_samples: 1_000_000,
        }
    }
}

pub fn weak_consistency_run(cfg: &WeakConfig, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    if cfg.n_grid.is_empty() || cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) || cfg.n_grid[0] == 0 {
        return Err(ExperimentError::Config("n_grid must be nonempty, positive and increasing".into()));
    }
    if cfg.test_size == 0 || cfg.trials == 0 {
        return Err(ExperimentError::Config("test_size and trials must be at least 1".into()));
    }
    let problem = cfg.problem.build(seed, cfg.oracle_samples)?;
    let sched = cfg.schedule.compile()?;
    let n_max = *cfg.n_grid.last().expect("nonempty");
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = labeled_stream(seed, "train", t as u64);
            let full = LabeledSample::draw(&problem, n_max, &mut rng);
            let test = test_set(&problem, seed, t as u64, cfg.test_size);
            cfg.n_grid
                .iter()
                .map(|&n| {
                    let sample = LabeledSample {
                        space: full.space,
                        points: full.points[..n].to_vec(),
                    };
                    let errs = conditional_error(&problem, &sample, &test, sched.k_of_n(n), cfg.policy)?;
                    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
                })
                .collect::<Result<Vec<f64>, ExperimentError>>()
        })
        .collect::<Result<_, _>>()?;
    let bayes = bayes_reference(&problem, cfg.bayes_samples, seed)?;
    let mut table = Table::new(&["n", "k", "mean_error", "stderr", "bayes_error", "bayes_stderr", "excess"]);
    let mut violations = Vec::new();
    for (j, &n) in cfg.n_grid.iter().enumerate() {
        let errs: Vec<f64> = per_trial.iter().map(|r| r[j]).collect();
        let (mean, se) = mean_and_stderr(&errs);
        if mean + 3.0 * se + 3.0 * bayes.stderr + 1e-12 < bayes.value {
            violations.push(format!(
                "n={n}: mean error {mean} is more than 3 sigma below the Bayes error {}",
                bayes.value
            ));
        }
        table.push(vec![
            n.into(),
            sched.k_of_n(n).into(),
            mean.into(),
            se.into(),
            bayes.value.into(),
            bayes.stderr.into(),
            (mean - bayes.value).into(),
        ]);
    }
    let resolved = WeakConfig {
        problem: cfg.problem.resolved(),
        ..cfg.clone()
    };
    let summary = serde_json::json!({ "bayes_error": bayes.value, "trials": cfg.trials });
    finish("weak-consistency", seed, &resolved, table, violations, summary)
}

/// About `per_decade` sizes per factor of ten between 1 and `n_max`,
/// always including `n_max`.
pub fn log_grid(n_max: usize, per_decade: usize) -> Vec<usize> {
    let mut out = vec![];
    let steps = ((n_max as f64).log10() * per_decade as f64).ceil() as usize;
    for s in 0..=steps {
        let n = 10f64.powf(s as f64 / per_decade as f64).round() as usize;
        let n = n.clamp(1, n_max);
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongConfig {
    pub problem: ProblemConfig,
    pub schedule: Schedule,
    pub n_max: usize,
    pub test_size: usize,
    pub policy: TieBreakPolicy,
    pub per_decade: usize,
    pub oracle_samples: usize,
    pub bayes_samples: usize,
}

impl Default for StrongConfig {
    fn default() -> Self {
        StrongConfig {
            problem: ProblemConfig::new(ModelConfig::TwoGaussians {}),
            schedule: Schedule::Sqrt,
            n_max: 4000,
            test_size: 2000,
            policy: TieBreakPolicy::ByIndex,
            per_decade: 8,
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
            bayes_samples: 1_000_000,
        }
    }
}

pub fn strong_consistency_path(cfg: &StrongConfig, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    if cfg.n_max == 0 || cfg.test_size == 0 || cfg.per_decade == 0 {
        return Err(ExperimentError::Config("n_max, test_size and per_decade must be positive".into()));
    }
    let problem = cfg.problem.build(seed, cfg.oracle_samples)?;
    let sched = cfg.schedule.compile()?;
    let test = test_set(&problem, seed, 0, cfg.test_size);
    let mut rng = labeled_stream(seed, "path", 0);
    let mut sample = LabeledSample::empty(problem.model.space());
    let bayes = bayes_reference(&problem, cfg.bayes_samples, seed)?;
    let mut table = Table::new(&["n", "k", "error", "stderr", "bayes_error", "excess"]);
    for n in log_grid(cfg.n_max, cfg.per_decade) {
        while sample.len() < n {
            sample.push_draw(&problem, &mut rng);
        }
        let k = sched.k_of_n(n);
        let errs = conditional_error(&problem, &sample, &test, k, cfg.policy)?;
        let (mean, se) = mean_and_stderr(&errs);
        table.push(vec![
            n.into(),
            k.into(),
            mean.into(),
            se.into(),
            bayes.value.into(),
            (mean - bayes.value).into(),
        ]);
    }
    let last = table.column("error").and_then(|c| c.last().copied()).unwrap_or(f64::NAN);
    let resolved = StrongConfig {
        problem: cfg.problem.resolved(),
        ..cfg.clone()
    };
    let summary = serde_json::json!({ "bayes_error": bayes.value, "final_error": last });
    finish("strong-path", seed, &resolved, table, Vec::new(), summary)
}
