//! Ball averages of `η` against `η` itself: the mass of points where
//! `|avg_{B(x,r)} η - η(x)| > ε`, over a decreasing radius grid.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ProblemConfig};
use super::{finish, ExperimentError, ExperimentResult, Table};
use crate::measure::{Estimate, Eta, LearningProblem, ProbabilityModel};
use crate::metric::Point;
use crate::rng::labeled_stream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbConfig {
    pub problem: ProblemConfig,
    pub r_grid: Vec<f64>,
    pub epsilon: f64,
    /// Points drawn to estimate the deviation mass.
    pub points: usize,
    /// Reference sample for ball averages without a closed form.
    pub oracle_samples: usize,
}

impl Default for LbConfig {
    fn default() -> Self {
        LbConfig {
            problem: ProblemConfig::new(ModelConfig::UniformCube { dim: 1 }),
            r_grid: vec![0.4, 0.3, 0.2, 0.1, 0.05, 0.025, 0.0125],
            epsilon: 0.1,
            points: 2000,
            oracle_samples: 20_000,
        }
    }
}

/// Terms summed explicitly before the tail of the nested model is
/// replaced by its parity average.
const NESTED_TERMS: u64 = 200_000;

/// `Σ_{b ≥ m} f(b) / (b(b+1))` for `f` depending on `b` only through its
/// parity beyond the explicit range.
fn nested_tail_sum(m: u64, f: impl Fn(u64) -> f64) -> f64 {
    let end = m.saturating_add(NESTED_TERMS);
    let mut s: f64 = (m..end).rev().map(|b| f(b) / (b as f64 * (b as f64 + 1.0))).sum();
    s += 0.5 * (f(end) + f(end + 1)) / end as f64;
    s
}

fn nested_index(x: &Point) -> Result<u64, ExperimentError> {
    match x {
        Point::Nested { index } => Ok(*index),
        other => Err(ExperimentError::Config(format!("{} is not a nested point", other.render()))),
    }
}

/// Smallest `m` with `r_m < r`, by bisection on the model's own ball
/// masses: the open ball `B(x_0, r)` has mass `1/m`.
fn nested_first_below(problem: &LearningProblem, r: f64) -> Result<Option<u64>, ExperimentError> {
    let mass = problem.model.ball_measure(&Point::nested(0), r, false)?.value;
    Ok((mass > 0.0).then(|| (1.0 / mass).round() as u64))
}

fn index_eta(problem: &LearningProblem) -> impl Fn(u64) -> f64 + '_ {
    move |b| problem.eta(&Point::nested(b))
}

/// Interval pieces `[lo, hi]` of `B(x, r) ∩ [0, 1]`.
fn clipped(x: f64, r: f64) -> (f64, f64) {
    ((x - r).max(0.0), (x + r).min(1.0))
}

/// Average of `η` over the open ball `B(x, r)`. Interval, nested, string
/// and atom models are summed exactly; other models average over
/// `reference`.
pub fn ball_average_eta(
    problem: &LearningProblem,
    x: &Point,
    r: f64,
    reference: &[Point],
) -> Result<f64, ExperimentError> {
    let eta_x = problem.eta(x);
    if let Eta::Constant { p } = problem.eta {
        return Ok(p);
    }
    match (&problem.model, x) {
        (ProbabilityModel::UniformCube(_), Point::Euclidean { coords }) if coords.len() == 1 => {
            let (lo, hi) = clipped(coords[0], r);
            match &problem.eta {
                Eta::FirstCoordinate => return Ok(0.5 * (lo + hi)),
                Eta::Step { threshold, below, above } => {
                    let cut = threshold.clamp(lo, hi);
                    return Ok((below * (cut - lo) + above * (hi - cut)) / (hi - lo));
                }
                _ => {}
            }
        }
        (ProbabilityModel::Nested(_), _) => {
            let a = nested_index(x)?;
            return Ok(match nested_first_below(problem, r)? {
                Some(m) if a == 0 || m <= a => m as f64 * nested_tail_sum(m, index_eta(problem)),
                _ => eta_x,
            });
        }
        (ProbabilityModel::SeqProduct(m), _) if matches!(problem.eta, Eta::FirstSymbol { .. }) => {
            // strings within distance < r agree with x on a prefix; only
            // the whole space reaches past the first symbol
            let whole = problem.model.ball_measure(x, r, false)?.value >= 1.0 - 1e-15;
            if !whole {
                return Ok(eta_x);
            }
            let Eta::FirstSymbol { values } = &problem.eta else { unreachable!() };
            return Ok(m
                .probs
                .iter()
                .enumerate()
                .map(|(s, p)| p * values.get(s).copied().unwrap_or(0.0))
                .sum());
        }
        (ProbabilityModel::Atoms(m), _) => {
            let (mut w, mut s) = (0.0, 0.0);
            for (y, mass) in &m.atoms {
                if m.space.distance(x, y)? < r {
                    w += mass;
                    s += mass * problem.eta(y);
                }
            }
            return Ok(if w > 0.0 { s / w } else { eta_x });
        }
        _ => {}
    }
    let space = problem.model.space();
    let (mut count, mut s) = (0usize, 0.0);
    for y in reference {
        if space.distance(x, y)? < r {
            count += 1;
            s += problem.eta(y);
        }
    }
    Ok(if count > 0 { s / count as f64 } else { eta_x })
}

/// Exact deviation mass where a closed form or atom sum exists.
fn exact_deviation(problem: &LearningProblem, r: f64, eps: f64) -> Result<Option<f64>, ExperimentError> {
    if let Eta::Constant { .. } = problem.eta {
        return Ok(Some(0.0));
    }
    Ok(match &problem.model {
        ProbabilityModel::UniformCube(c) if c.dim == 1 && problem.eta == Eta::FirstCoordinate && r <= 0.5 => {
            // near each end the average is (x + r)/2, off by (r - x)/2
            Some(2.0 * (r - 2.0 * eps).max(0.0))
        }
        ProbabilityModel::Nested(_) => match nested_first_below(problem, r)? {
            None => Some(0.0),
            Some(m) => {
                let tail = m as f64 * nested_tail_sum(m, index_eta(problem));
                let eta = index_eta(problem);
                Some(nested_tail_sum(m, |b| ((tail - eta(b)).abs() > eps) as u8 as f64))
            }
        },
        ProbabilityModel::SeqProduct(m) => match &problem.eta {
            Eta::FirstSymbol { values } => {
                let x = Point::seq(vec![0u8; m.depth]);
                if problem.model.ball_measure(&x, r, false)?.value < 1.0 - 1e-15 {
                    Some(0.0)
                } else {
                    let avg = ball_average_eta(problem, &x, r, &[])?;
                    Some(
                        m.probs
                            .iter()
                            .enumerate()
                            .filter(|(s, _)| (avg - values.get(*s).copied().unwrap_or(0.0)).abs() > eps)
                            .map(|(_, p)| p)
                            .sum(),
                    )
                }
            }
            _ => None,
        },
        ProbabilityModel::Atoms(m) => {
            let mut total = 0.0;
            for (y, mass) in &m.atoms {
                if (ball_average_eta(problem, y, r, &[])? - problem.eta(y)).abs() > eps {
                    total += mass;
                }
            }
            Some(total)
        }
        _ => None,
    })
}

fn draw(problem: &LearningProblem, rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n).map(|_| problem.model.sample(rng)).collect()
}

fn needs_reference(problem: &LearningProblem) -> bool {
    match (&problem.model, &problem.eta) {
        (_, Eta::Constant { .. }) => false,
        (ProbabilityModel::UniformCube(c), Eta::FirstCoordinate | Eta::Step { .. }) => c.dim != 1,
        (ProbabilityModel::Nested(_) | ProbabilityModel::Atoms(_), _) => false,
        (ProbabilityModel::SeqProduct(_), Eta::FirstSymbol { .. }) => false,
        _ => true,
    }
}

pub fn lb_differentiation_check(cfg: &LbConfig, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    if !(cfg.epsilon > 0.0) {
        return Err(ExperimentError::Config(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    if cfg.r_grid.is_empty() || cfg.r_grid.iter().any(|r| !(*r > 0.0)) || cfg.r_grid.windows(2).any(|w| w[0] <= w[1])
    {
        return Err(ExperimentError::Config("r_grid must be positive and strictly decreasing".into()));
    }
    if cfg.points == 0 {
        return Err(ExperimentError::Config("points must be at least 1".into()));
    }
    let problem = cfg.problem.build(seed, cfg.oracle_samples)?;
    let reference = if needs_reference(&problem) {
        draw(&problem, &mut labeled_stream(seed, "lb-reference", 0), cfg.oracle_samples)
    } else {
        Vec::new()
    };
    let xs = draw(&problem, &mut labeled_stream(seed, "lb-points", 0), cfg.points);
    let mut table = Table::new(&["r", "deviation_measure", "stderr", "exact_measure"]);
    for &r in &cfg.r_grid {
        let flags: Vec<bool> = xs
            .par_iter()
            .map(|x| Ok((ball_average_eta(&problem, x, r, &reference)? - problem.eta(x)).abs() > cfg.epsilon))
            .collect::<Result<_, ExperimentError>>()?;
        let est = Estimate::proportion(flags.iter().filter(|&&f| f).count(), flags.len());
        let exact = exact_deviation(&problem, r, cfg.epsilon)?.unwrap_or(f64::NAN);
        table.push(vec![r.into(), est.value.into(), est.stderr.into(), exact.into()]);
    }
    let resolved = LbConfig {
        problem: cfg.problem.resolved(),
        ..cfg.clone()
    };
    let space = problem.model.space();
    let summary = serde_json::json!({
        "space": space.name(),
        "reference_points": reference.len(),
    });
    finish("lb-check", seed, &resolved, table, Vec::new(), summary)
}
