//! Spread of `E{|η(X) - η_n(X)| | X ∈ Q}` over independent samples,
//! against `4 exp(-nε²μ(Q)²/(18(β+1)²))`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ProblemConfig, RegionSpec, DEFAULT_ORACLE_SAMPLES};
use super::{finish, mean_and_stderr, ExperimentError, ExperimentResult, Table};
use crate::knn::{eta_n, LabeledSample, TieBreakPolicy};
use crate::measure::LearningProblem;
use crate::metric::Point;
use crate::rng::labeled_stream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub problem: ProblemConfig,
    pub region: RegionSpec,
    /// Nagata dimension of the region, supplied by the caller.
    pub beta: f64,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// Points of `Q` averaged over for each conditional expectation.
    pub eval_points: usize,
    pub epsilons: Vec<f64>,
    pub policy: TieBreakPolicy,
    pub oracle_samples: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            problem: ProblemConfig::new(ModelConfig::UniformCube { dim: 1 }),
            region: RegionSpec::Whole,
            beta: 1.0,
            n: 2000,
            k: 44,
            trials: 200,
            eval_points: 500,
            epsilons: vec![0.1, 0.2, 0.3],
            policy: TieBreakPolicy::ByIndex,
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
        }
    }
}

pub fn mcdiarmid_bound(n: usize, epsilon: f64, mu_q: f64, beta: f64) -> f64 {
    4.0 * (-(n as f64) * epsilon * epsilon * mu_q * mu_q / (18.0 * (beta + 1.0) * (beta + 1.0))).exp()
}

/// Draws `count` points of `Q` by rejection; also returns the acceptance
/// rate as an estimate of `μ(Q)`.
fn region_points(
    problem: &LearningProblem,
    region: &RegionSpec,
    count: usize,
    seed: u64,
) -> Result<(Vec<Point>, f64), ExperimentError> {
    let mut rng = labeled_stream(seed, "region", 0);
    let space = problem.model.space();
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) && out.len() * 1000 < tries {
            return Err(ExperimentError::Config("the region has (nearly) zero mass".into()));
        }
        let x = problem.model.sample(&mut rng);
        if region.contains(&space, &x)? {
            out.push(x);
        }
    }
    Ok((out, count as f64 / tries as f64))
}

pub fn deviation_concentration(cfg: &ConcentrationConfig, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    if cfg.k == 0 || cfg.k > cfg.n {
        return Err(ExperimentError::Config(format!("need 1 ≤ k ≤ n, got k={} n={}", cfg.k, cfg.n)));
    }
    if cfg.trials == 0 || cfg.eval_points == 0 || cfg.epsilons.is_empty() {
        return Err(ExperimentError::Config("trials, eval_points and epsilons must be nonempty".into()));
    }
    if !(cfg.beta >= 0.0) {
        return Err(ExperimentError::Config(format!("beta must be nonnegative, got {}", cfg.beta)));
    }
    let problem = cfg.problem.build(seed, cfg.oracle_samples)?;
    let (eval, rate) = region_points(&problem, &cfg.region, cfg.eval_points, seed)?;
    let exact = cfg.region.exact_mass(&problem.model)?;
    let mu_q = exact.unwrap_or(rate);
    if !(mu_q > 0.0) {
        return Err(ExperimentError::Config("the region has zero mass".into()));
    }
    let deviations: Vec<f64> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = labeled_stream(seed, "train", t);
            let sample = LabeledSample::draw(&problem, cfg.n, &mut rng);
            let mut zr = labeled_stream(seed, "query-z", t);
            let mut s = 0.0;
            for x in &eval {
                let z: f64 = zr.random();
                s += (problem.eta(x) - eta_n(&sample, x, cfg.k, cfg.policy, z)?).abs();
            }
            Ok(s / eval.len() as f64)
        })
        .collect::<Result<_, ExperimentError>>()?;
    let (mean, se) = mean_and_stderr(&deviations);

    let mut table = Table::new(&["epsilon", "empirical_tail", "stderr", "bound", "vacuous", "pass"]);
    let mut violations = Vec::new();
    let trials = cfg.trials as f64;
    for &eps in &cfg.epsilons {
        let hits = deviations.iter().filter(|&&d| d > eps).count();
        let tail = hits as f64 / trials;
        let sigma = (tail * (1.0 - tail) / trials).sqrt();
        let bound = mcdiarmid_bound(cfg.n, eps, mu_q, cfg.beta);
        let pass = tail <= bound + 3.0 * sigma;
        if !pass {
            violations.push(format!("epsilon={eps}: empirical tail {tail} exceeds the bound {bound}"));
        }
        table.push(vec![
            eps.into(),
            tail.into(),
            sigma.into(),
            bound.into(),
            (bound >= 1.0).into(),
            pass.into(),
        ]);
    }
    let resolved = ConcentrationConfig {
        problem: cfg.problem.resolved(),
        ..cfg.clone()
    };
    let summary = serde_json::json!({
        "mu_q": mu_q,
        "mu_q_exact": exact.is_some(),
        "mean_deviation": mean,
        "mean_deviation_stderr": se,
    });
    finish("concentration", seed, &resolved, table, violations, summary)
}
