use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Estimate, MeasureError, ProbabilityModel};
use crate::metric::Point;

/// The regression function `η(x) = P(Y = 1 | X = x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Eta {
    Constant { p: f64 },
    /// `η(x) = x_1` clamped to `[0,1]`.
    FirstCoordinate,
    /// `below` when `x_1 < threshold`, `above` otherwise.
    Step { threshold: f64, below: f64, above: f64 },
    /// Nested-ball model: `even` on `x_n` with `n` even (including the
    /// limit point), `odd` otherwise.
    NestedParity { even: f64, odd: f64 },
    /// Symbol strings: `values[s]` where `s` is the first symbol.
    FirstSymbol { values: Vec<f64> },
    /// Posterior of a Gaussian mixture under its component labels.
    MixturePosterior,
}

impl Eta {
    pub fn name(&self) -> String {
        match self {
            Eta::Constant { p } => format!("constant({p})"),
            Eta::FirstCoordinate => "first-coordinate".into(),
            Eta::Step { threshold, .. } => format!("step({threshold})"),
            Eta::NestedParity { .. } => "nested-parity".into(),
            Eta::FirstSymbol { .. } => "first-symbol".into(),
            Eta::MixturePosterior => "mixture-posterior".into(),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Eta::Constant { p } => vec![*p],
            Eta::Step { below, above, .. } => vec![*below, *above],
            Eta::NestedParity { even, odd } => vec![*even, *odd],
            Eta::FirstSymbol { values } => values.clone(),
            Eta::FirstCoordinate | Eta::MixturePosterior => vec![],
        }
    }

    fn compatible(&self, model: &ProbabilityModel) -> bool {
        let euclidean = matches!(
            model,
            ProbabilityModel::UniformCube(_) | ProbabilityModel::GaussianMixture(_)
        ) || matches!(model, ProbabilityModel::Atoms(a) if matches!(a.space, crate::metric::Space::Euclidean { .. }));
        match self {
            Eta::Constant { .. } => true,
            Eta::FirstCoordinate | Eta::Step { .. } => euclidean,
            Eta::NestedParity { .. } => matches!(model, ProbabilityModel::Nested(_)),
            Eta::FirstSymbol { .. } => {
                matches!(model, ProbabilityModel::SeqProduct(_))
                    || matches!(model, ProbabilityModel::Atoms(a) if a.space == crate::metric::Space::UltrametricSeq)
            }
            Eta::MixturePosterior => matches!(model, ProbabilityModel::GaussianMixture(_)),
        }
    }
}

/// A probability model together with its regression function.
#[derive(Debug, Clone, Serialize)]
pub struct LearningProblem {
    pub model: ProbabilityModel,
    pub eta: Eta,
}

impl LearningProblem {
    pub fn new(model: ProbabilityModel, eta: Eta) -> Result<Self, MeasureError> {
        if eta.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(MeasureError::BadModel(format!("{} takes values outside [0,1]", eta.name())));
        }
        if !eta.compatible(&model) {
            return Err(MeasureError::IncompatibleEta {
                eta: eta.name(),
                model: model.name(),
            });
        }
        Ok(LearningProblem { model, eta })
    }

    pub fn eta(&self, x: &Point) -> f64 {
        match (&self.eta, x) {
            (Eta::Constant { p }, _) => *p,
            (Eta::FirstCoordinate, _) => x.first_coord().unwrap_or(0.0).clamp(0.0, 1.0),
            (Eta::Step { threshold, below, above }, _) => {
                if x.first_coord().unwrap_or(0.0) < *threshold {
                    *below
                } else {
                    *above
                }
            }
            (Eta::NestedParity { even, odd }, Point::Nested { index }) => {
                if index % 2 == 0 {
                    *even
                } else {
                    *odd
                }
            }
            (Eta::FirstSymbol { values }, Point::Seq { symbols }) => symbols
                .first()
                .and_then(|s| values.get(*s as usize))
                .copied()
                .unwrap_or(0.0),
            (Eta::MixturePosterior, Point::Euclidean { coords }) => match &self.model {
                ProbabilityModel::GaussianMixture(g) => g.posterior(coords),
                _ => 0.0,
            },
            _ => 0.0,
        }
    }

    /// One labelled draw `(X, Y)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Point, u8) {
        let x = self.model.sample(rng);
        let y = (rng.random::<f64>() < self.eta(&x)) as u8;
        (x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BayesMethod {
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

fn bayes_local(p: f64) -> f64 {
    p.min(1.0 - p)
}

/// Composite Gauss–Legendre (5 nodes) on `[a, b]` split into `pieces`.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `ℓ* = E_μ[min(η(X), 1 - η(X))]`.
pub fn bayes_error(problem: &LearningProblem, method: BayesMethod) -> Result<Estimate, MeasureError> {
    match method {
        BayesMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(MeasureError::BadModel("sample count must be positive".into()));
            }
            let block = 4096;
            let sums: Vec<(f64, f64)> = (0..samples.div_ceil(block))
                .into_par_iter()
                .map(|b| {
                    let mut rng = crate::rng::labeled_stream(seed, "bayes", b as u64);
                    let len = block.min(samples - b * block);
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    for _ in 0..len {
                        let v = bayes_local(problem.eta(&problem.model.sample(&mut rng)));
                        s += v;
                        s2 += v * v;
                    }
                    (s, s2)
                })
                .collect();
            let n = samples as f64;
            let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let mean = s / n;
            let var = if samples > 1 { (s2 - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
            Ok(Estimate {
                value: mean,
                stderr: (var / n).sqrt(),
            })
        }
        BayesMethod::Quadrature => bayes_quadrature(problem).map(Estimate::exact),
    }
}

fn bayes_quadrature(problem: &LearningProblem) -> Result<f64, MeasureError> {
    if let Eta::Constant { p } = problem.eta {
        return Ok(bayes_local(p));
    }
    match (&problem.model, &problem.eta) {
        (ProbabilityModel::Atoms(m), _) => Ok(m.atoms.iter().map(|(x, w)| w * bayes_local(problem.eta(x))).sum()),
        (ProbabilityModel::Nested(_), Eta::NestedParity { even, odd }) => {
            // Σ_{n odd} 1/(n(n+1)) = ln 2
            let ln2 = std::f64::consts::LN_2;
            Ok(ln2 * bayes_local(*odd) + (1.0 - ln2) * bayes_local(*even))
        }
        (ProbabilityModel::SeqProduct(m), Eta::FirstSymbol { .. }) => Ok(m
            .probs
            .iter()
            .enumerate()
            .map(|(s, p)| p * bayes_local(problem.eta(&Point::Seq { symbols: vec![s as u8] })))
            .sum()),
        (ProbabilityModel::UniformCube(_), Eta::FirstCoordinate) => Ok(0.25),
        (ProbabilityModel::UniformCube(_), Eta::Step { threshold, below, above }) => {
            let t = threshold.clamp(0.0, 1.0);
            Ok(t * bayes_local(*below) + (1.0 - t) * bayes_local(*above))
        }
        (ProbabilityModel::GaussianMixture(g), Eta::MixturePosterior) if g.dim <= 2 => {
            // ∫ min(f_1, f_0) over a box of ±9 sd around every mean
            let span = |axis: usize| {
                g.components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c.mean[axis] - 9.0 * c.sd), hi.max(c.mean[axis] + 9.0 * c.sd))
                })
            };
            let (a0, b0) = span(0);
            let local = |x: &[f64]| {
                let (one, zero) = g.class_densities(x);
                one.min(zero)
            };
            if g.dim == 1 {
                return Ok(gauss_legendre(|t| local(&[t]), a0, b0, 4000));
            }
            let (a1, b1) = span(1);
            let pieces = 600;
            let h = (b0 - a0) / pieces as f64;
            let rows: Vec<f64> = (0..pieces)
                .into_par_iter()
                .map(|i| {
                    let lo = a0 + i as f64 * h;
                    gauss_legendre(|u| gauss_legendre(|v| local(&[u, v]), a1, b1, pieces), lo, lo + h, 1)
                })
                .collect();
            Ok(rows.iter().sum())
        }
        (m, _) => Err(MeasureError::QuadratureUnavailable(m.name())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomModel, GaussianComponent, GaussianMixture, McOracle, NestedBallModel, UniformCube};

    #[test]
    fn constant_eta() {
        let m = ProbabilityModel::UniformCube(UniformCube::new(2).unwrap());
        for (p, want) in [(1.0, 0.0), (0.5, 0.5), (0.2, 0.2)] {
            let prob = LearningProblem::new(m.clone(), Eta::Constant { p }).unwrap();
            assert_eq!(bayes_error(&prob, BayesMethod::Quadrature).unwrap().value, want);
        }
    }

    #[test]
    fn dirac_with_e_inverse() {
        let p = (-1.0f64).exp();
        let prob = LearningProblem::new(
            ProbabilityModel::Atoms(AtomModel::dirac(Point::euclidean([0.0]))),
            Eta::Step {
                threshold: 10.0,
                below: p,
                above: 0.0,
            },
        )
        .unwrap();
        let b = bayes_error(&prob, BayesMethod::Quadrature).unwrap().value;
        assert!((b - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn nested_parity_mass() {
        let prob = LearningProblem::new(
            ProbabilityModel::Nested(NestedBallModel::default()),
            Eta::NestedParity { even: 0.0, odd: 0.3 },
        )
        .unwrap();
        let q = bayes_error(&prob, BayesMethod::Quadrature).unwrap().value;
        // partial sums of the series
        let odd: f64 = (0..200_000u64).map(|k| {
            let n = (2 * k + 1) as f64;
            1.0 / (n * (n + 1.0))
        }).sum();
        assert!((q - 0.3 * odd).abs() < 1e-6);
        let mc = bayes_error(&prob, BayesMethod::MonteCarlo { samples: 200_000, seed: 1 }).unwrap();
        assert!((mc.value - q).abs() < 4.0 * mc.stderr);
    }

    #[test]
    fn mixture_quadrature_matches_closed_form() {
        // two unit Gaussians at ±1 in the plane, deterministic labels:
        // ℓ* = Φ(-1)
        let g = GaussianMixture::new(
            2,
            vec![
                GaussianComponent {
                    weight: 0.5,
                    mean: vec![-1.0, 0.0],
                    sd: 1.0,
                    label: 0.0,
                },
                GaussianComponent {
                    weight: 0.5,
                    mean: vec![1.0, 0.0],
                    sd: 1.0,
                    label: 1.0,
                },
            ],
            McOracle::new(10, 0),
        )
        .unwrap();
        let prob = LearningProblem::new(ProbabilityModel::GaussianMixture(g), Eta::MixturePosterior).unwrap();
        let q = bayes_error(&prob, BayesMethod::Quadrature).unwrap().value;
        let phi_m1 = 0.15865525393145707;
        assert!((q - phi_m1).abs() < 1e-8, "{q}");
    }

    #[test]
    fn incompatible_eta_is_rejected() {
        let m = ProbabilityModel::Nested(NestedBallModel::default());
        assert!(LearningProblem::new(m.clone(), Eta::FirstCoordinate).is_err());
        assert!(LearningProblem::new(m, Eta::Constant { p: 1.5 }).is_err());
    }
}
