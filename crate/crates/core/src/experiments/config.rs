//! Model, problem and region descriptions as they appear in run configs.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::measure::{
    AtomModel, Eta, GaussianComponent, GaussianMixture, HeisenbergBox, LearningProblem, McOracle, NestedBallModel,
    ProbabilityModel, SeqProductModel, UniformCube,
};
use crate::metric::{Point, Space};
use crate::rng::derive_seed;

pub const DEFAULT_ORACLE_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomConfig {
    pub point: Point,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Atoms `x_n` of mass `1/(n(n+1))` on the nested-ball space.
    Nested {},
    /// Uniform measure on strings of length `depth` over `alphabet` symbols.
    Cantor {
        #[serde(default = "default_depth")]
        depth: usize,
        #[serde(default = "default_alphabet")]
        alphabet: usize,
    },
    SeqProduct { depth: usize, probs: Vec<f64> },
    UniformCube { dim: usize },
    GaussianMixture { dim: usize, components: Vec<GaussianComponent> },
    /// The planar mixture used for the consistency runs.
    TwoGaussians {},
    /// Point mass at the origin of the real line.
    Dirac {},
    Atoms { space: Space, atoms: Vec<AtomConfig> },
    HeisenbergBox { half_width: f64 },
}

fn default_depth() -> usize {
    20
}

fn default_alphabet() -> usize {
    2
}

/// One Gaussian per class in the plane: a tight class-0 cluster inside a
/// wide class-1 cloud, so the Bayes boundary is a small closed curve.
pub fn two_gaussians_components() -> Vec<GaussianComponent> {
    vec![
        GaussianComponent {
            weight: 0.5,
            mean: vec![0.0, 0.0],
            sd: 0.25,
            label: 0.0,
        },
        GaussianComponent {
            weight: 0.5,
            mean: vec![0.5, 0.0],
            sd: 1.5,
            label: 1.0,
        },
    ]
}

impl ModelConfig {
    /// Builds the model. Monte-Carlo oracles draw `oracle_samples` reference
    /// points from a stream derived from `seed`.
    pub fn build(&self, seed: u64, oracle_samples: usize) -> Result<ProbabilityModel, ExperimentError> {
        let oracle = || McOracle::new(oracle_samples, derive_seed(seed, 0x6f72_6163_6c65));
        Ok(match self {
            ModelConfig::Nested {} => ProbabilityModel::Nested(NestedBallModel::default()),
            ModelConfig::Cantor { depth, alphabet } => {
                ProbabilityModel::SeqProduct(SeqProductModel::uniform(*depth, *alphabet)?)
            }
            ModelConfig::SeqProduct { depth, probs } => {
                ProbabilityModel::SeqProduct(SeqProductModel::new(*depth, probs.clone())?)
            }
            ModelConfig::UniformCube { dim } => {
                ProbabilityModel::UniformCube(UniformCube::with_oracle(*dim, oracle())?)
            }
            ModelConfig::GaussianMixture { dim, components } => {
                ProbabilityModel::GaussianMixture(GaussianMixture::new(*dim, components.clone(), oracle())?)
            }
            ModelConfig::TwoGaussians {} => {
                ProbabilityModel::GaussianMixture(GaussianMixture::new(2, two_gaussians_components(), oracle())?)
            }
            ModelConfig::Dirac {} => ProbabilityModel::Atoms(AtomModel::dirac(Point::euclidean([0.0]))),
            ModelConfig::Atoms { space, atoms } => ProbabilityModel::Atoms(AtomModel::new(
                *space,
                atoms.iter().map(|a| (a.point.clone(), a.mass)).collect(),
            )?),
            ModelConfig::HeisenbergBox { half_width } => {
                ProbabilityModel::HeisenbergBox(HeisenbergBox::new(*half_width, oracle())?)
            }
        })
    }

    /// Regression function used when a config names none.
    pub fn default_eta(&self) -> Eta {
        match self {
            ModelConfig::Nested {} => Eta::NestedParity { even: 1.0, odd: 0.0 },
            ModelConfig::Cantor { alphabet, .. } => first_symbol_ramp(*alphabet),
            ModelConfig::SeqProduct { probs, .. } => first_symbol_ramp(probs.len()),
            ModelConfig::UniformCube { .. } => Eta::FirstCoordinate,
            ModelConfig::GaussianMixture { .. } | ModelConfig::TwoGaussians {} => Eta::MixturePosterior,
            ModelConfig::Dirac {} => Eta::Constant { p: (-1.0f64).exp() },
            ModelConfig::Atoms { .. } | ModelConfig::HeisenbergBox { .. } => Eta::Constant { p: 0.5 },
        }
    }

    /// Shorthand accepted on the command line.
    pub fn from_name(name: &str) -> Result<Self, ExperimentError> {
        Ok(match name {
            "nested" => ModelConfig::Nested {},
            "cantor" => ModelConfig::Cantor {
                depth: default_depth(),
                alphabet: default_alphabet(),
            },
            "interval" | "uniform-1d" => ModelConfig::UniformCube { dim: 1 },
            "square" | "uniform-2d" => ModelConfig::UniformCube { dim: 2 },
            "two-gaussians" => ModelConfig::TwoGaussians {},
            "dirac" => ModelConfig::Dirac {},
            other => {
                return Err(ExperimentError::Config(format!(
                    "unknown model `{other}` (nested, cantor, interval, square, two-gaussians, dirac)"
                )))
            }
        })
    }
}

fn first_symbol_ramp(alphabet: usize) -> Eta {
    let values = if alphabet <= 1 {
        vec![0.5; alphabet]
    } else {
        (0..alphabet).map(|s| s as f64 / (alphabet - 1) as f64).collect()
    };
    Eta::FirstSymbol { values }
}

/// A model and, optionally, its regression function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub eta: Option<Eta>,
}

impl ProblemConfig {
    pub fn new(model: ModelConfig) -> Self {
        ProblemConfig { model, eta: None }
    }

    pub fn build(&self, seed: u64, oracle_samples: usize) -> Result<LearningProblem, ExperimentError> {
        let model = self.model.build(seed, oracle_samples)?;
        let eta = self.eta.clone().unwrap_or_else(|| self.model.default_eta());
        Ok(LearningProblem::new(model, eta)?)
    }

    /// Same problem with every `None` filled in, for manifests.
    pub fn resolved(&self) -> Self {
        ProblemConfig {
            model: self.model.clone(),
            eta: Some(self.eta.clone().unwrap_or_else(|| self.model.default_eta())),
        }
    }
}

/// The set `Q` of a concentration run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    Whole,
    /// Open or closed ball; its mass comes from the model's oracle.
    Ball {
        center: Point,
        radius: f64,
        #[serde(default)]
        closed: bool,
    },
    /// Points whose first coordinate lies in `[lo, hi)`; the mass is
    /// estimated by the acceptance rate of rejection sampling.
    Slab { lo: f64, hi: f64 },
}

impl RegionSpec {
    pub fn contains(&self, space: &Space, x: &Point) -> Result<bool, ExperimentError> {
        Ok(match self {
            RegionSpec::Whole => true,
            RegionSpec::Ball { center, radius, closed } => {
                let d = space.distance(center, x)?;
                d < *radius || (*closed && d == *radius)
            }
            RegionSpec::Slab { lo, hi } => x.first_coord().is_some_and(|c| *lo <= c && c < *hi),
        })
    }

    /// `μ(Q)` when an oracle gives it.
    pub fn exact_mass(&self, model: &ProbabilityModel) -> Result<Option<f64>, ExperimentError> {
        Ok(match self {
            RegionSpec::Whole => Some(1.0),
            RegionSpec::Ball { center, radius, closed } => {
                let e = model.ball_measure(center, *radius, *closed)?;
                (e.stderr == 0.0).then_some(e.value)
            }
            RegionSpec::Slab { lo, hi } => match model {
                ProbabilityModel::UniformCube(_) => Some((hi.min(1.0) - lo.max(0.0)).max(0.0)),
                _ => None,
            },
        })
    }
}
