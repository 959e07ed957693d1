//! Probability models on metric spaces and their ball-measure oracles.
//!
//! Discrete models (finite atom lists, the nested-ball model, product
//! measures on symbol strings) and the uniform measure on the unit square or
//! interval have exact oracles. Everything else is served by a Monte-Carlo
//! oracle built from a fixed, seeded reference sample.

mod continuous;
mod discrete;
mod extended;
mod nested;
mod problem;
mod seq;

pub use continuous::{disc_square_area, GaussianComponent, GaussianMixture, HeisenbergBox, McOracle, UniformCube};
pub use discrete::AtomModel;
pub use extended::{
    b_alpha, b_alpha_from, b_alpha_half, band_length, d_measure_estimate, d_measure_exact, extended_ball_measure,
    in_d_set, d_measure_bound, tie_band_measure,
};
pub use nested::{nested_d_lower_bound, NestedAlpha, NestedBallModel, NestedLowerBound};
pub use problem::{bayes_error, BayesMethod, Eta, LearningProblem};
pub use seq::SeqProductModel;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::metric::{MetricError, Point, Space};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("alpha must lie in {range}, got {alpha}")]
    Alpha { alpha: f64, range: &'static str },
    #[error("radius must be nonnegative, got {0}")]
    NegativeRadius(f64),
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("point {0} is not in the model's domain")]
    PointOutsideModel(String),
    #[error("regression function {eta} is not defined on model {model}")]
    IncompatibleEta { eta: String, model: &'static str },
    #[error("no quadrature rule for model {0}; use the Monte-Carlo method")]
    QuadratureUnavailable(&'static str),
    #[error("alpha = {0} is too large for the index range of the lower bound")]
    AlphaTooLarge(f64),
    #[error("band offset must lie in [0,1], got {0}")]
    BandOffset(f64),
}

/// A measured quantity with its standard error (zero for exact oracles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// Proportion estimate `hits / n` with binomial standard error.
    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    /// Sample mean with the standard error of the mean.
    pub fn mean_of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            value: mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Radius `r_α(x)` together with the open- and closed-ball masses there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaBall {
    pub radius: f64,
    pub open_mass: f64,
    pub closed_mass: f64,
}

impl AlphaBall {
    pub fn sphere_mass(&self) -> f64 {
        (self.closed_mass - self.open_mass).max(0.0)
    }
}

/// A probability measure on one of the supported spaces.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbabilityModel {
    Atoms(AtomModel),
    Nested(NestedBallModel),
    SeqProduct(SeqProductModel),
    UniformCube(UniformCube),
    GaussianMixture(GaussianMixture),
    HeisenbergBox(HeisenbergBox),
}

impl ProbabilityModel {
    pub fn name(&self) -> &'static str {
        match self {
            ProbabilityModel::Atoms(_) => "atoms",
            ProbabilityModel::Nested(_) => "nested",
            ProbabilityModel::SeqProduct(_) => "seq_product",
            ProbabilityModel::UniformCube(_) => "uniform_cube",
            ProbabilityModel::GaussianMixture(_) => "gaussian_mixture",
            ProbabilityModel::HeisenbergBox(_) => "heisenberg_box",
        }
    }

    pub fn space(&self) -> Space {
        match self {
            ProbabilityModel::Atoms(m) => m.space,
            ProbabilityModel::Nested(m) => Space::NestedBall(m.space),
            ProbabilityModel::SeqProduct(_) => Space::UltrametricSeq,
            ProbabilityModel::UniformCube(m) => Space::Euclidean { dim: m.dim },
            ProbabilityModel::GaussianMixture(m) => Space::Euclidean { dim: m.dim },
            ProbabilityModel::HeisenbergBox(_) => Space::Heisenberg,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            ProbabilityModel::Atoms(m) => m.sample(rng),
            ProbabilityModel::Nested(m) => m.sample(rng),
            ProbabilityModel::SeqProduct(m) => m.sample(rng),
            ProbabilityModel::UniformCube(m) => m.sample(rng),
            ProbabilityModel::GaussianMixture(m) => m.sample(rng),
            ProbabilityModel::HeisenbergBox(m) => m.sample(rng),
        }
    }

    /// True when ball measures are computed exactly rather than estimated.
    pub fn is_exact(&self) -> bool {
        match self {
            ProbabilityModel::Atoms(_) | ProbabilityModel::Nested(_) | ProbabilityModel::SeqProduct(_) => true,
            ProbabilityModel::UniformCube(m) => m.dim <= 2,
            ProbabilityModel::GaussianMixture(_) | ProbabilityModel::HeisenbergBox(_) => false,
        }
    }

    /// Exact oracle for a measure with no atoms and null spheres.
    pub(crate) fn is_exact_continuous(&self) -> bool {
        matches!(self, ProbabilityModel::UniformCube(m) if m.dim <= 2)
    }

    fn mc_oracle(&self) -> Option<&McOracle> {
        match self {
            ProbabilityModel::UniformCube(m) if m.dim > 2 => Some(&m.oracle),
            ProbabilityModel::GaussianMixture(m) => Some(&m.oracle),
            ProbabilityModel::HeisenbergBox(m) => Some(&m.oracle),
            _ => None,
        }
    }

    pub(crate) fn check_point(&self, x: &Point) -> Result<(), MeasureError> {
        let space = self.space();
        if !space.accepts(x) {
            return Err(MeasureError::PointOutsideModel(x.render()));
        }
        if let (Space::Euclidean { dim }, Some(c)) = (space, x.as_coords()) {
            if c.len() != dim {
                return Err(MetricError::Dimension {
                    expected: dim,
                    found: c.len(),
                }
                .into());
            }
        }
        Ok(())
    }

    /// `μ(B(x, r))` (open) or `μ(B̄(x, r))` (closed).
    pub fn ball_measure(&self, x: &Point, r: f64, closed: bool) -> Result<Estimate, MeasureError> {
        if !(r >= 0.0) {
            return Err(MeasureError::NegativeRadius(r));
        }
        self.check_point(x)?;
        if !closed && r == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        if let Some(oracle) = self.mc_oracle() {
            return oracle.ball_measure(&self.space(), || self.reference_sample(), x, r, closed);
        }
        Ok(Estimate::exact(match self {
            ProbabilityModel::Atoms(m) => m.ball_measure(x, r, closed)?,
            ProbabilityModel::Nested(m) => m.ball_measure(x, r, closed)?,
            ProbabilityModel::SeqProduct(m) => m.ball_measure(x, r, closed)?,
            ProbabilityModel::UniformCube(m) => m.ball_measure(x, r),
            _ => unreachable!("monte-carlo models handled above"),
        }))
    }

    /// `μ(S(x, r))`, the mass of the sphere.
    pub fn sphere_measure(&self, x: &Point, r: f64) -> Result<Estimate, MeasureError> {
        let closed = self.ball_measure(x, r, true)?;
        let open = self.ball_measure(x, r, false)?;
        Ok(Estimate {
            value: (closed.value - open.value).max(0.0),
            stderr: closed.stderr,
        })
    }

    /// `r_α(x) = inf{r > 0 : μ(B(x, r)) ≥ α}` with the ball masses there.
    pub fn alpha_ball(&self, x: &Point, alpha: f64) -> Result<AlphaBall, MeasureError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(MeasureError::Alpha {
                alpha,
                range: "(0, 1]",
            });
        }
        self.check_point(x)?;
        if let Some(oracle) = self.mc_oracle() {
            return oracle.alpha_ball(&self.space(), self.reference_sample(), x, alpha);
        }
        match self {
            ProbabilityModel::Atoms(m) => m.alpha_ball(x, alpha),
            ProbabilityModel::Nested(m) => m.alpha_ball(x, alpha),
            ProbabilityModel::SeqProduct(m) => m.alpha_ball(x, alpha),
            ProbabilityModel::UniformCube(m) => Ok(m.alpha_ball(x, alpha)),
            _ => unreachable!("monte-carlo models handled above"),
        }
    }

    pub fn r_alpha(&self, x: &Point, alpha: f64) -> Result<f64, MeasureError> {
        Ok(self.alpha_ball(x, alpha)?.radius)
    }

    fn reference_sample(&self) -> &[Point] {
        match self {
            ProbabilityModel::UniformCube(m) => m.oracle.reference(|rng| m.sample(rng)),
            ProbabilityModel::GaussianMixture(m) => m.oracle.reference(|rng| m.sample(rng)),
            ProbabilityModel::HeisenbergBox(m) => m.oracle.reference(|rng| m.sample(rng)),
            _ => &[],
        }
    }

    /// Largest distance among 1024 seeded sample points, doubled. Used as
    /// the upper end of radius searches.
    pub fn diameter_estimate(&self) -> f64 {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6469_616d);
        let pts: Vec<Point> = (0..1024).map(|_| self.sample(&mut rng)).collect();
        let space = self.space();
        let mut best: f64 = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if let Ok(d) = space.distance(&pts[i], &pts[j]) {
                    best = best.max(d);
                }
            }
        }
        2.0 * best
    }
}
