use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{AlphaBall, Estimate, MeasureError};
use crate::metric::{HeisPoint, Point, Space};

/// Ball measures estimated from one fixed reference sample of size
/// `samples`, drawn once from the model with generator seed `seed`.
#[derive(Debug, Clone, Serialize)]
pub struct McOracle {
    pub samples: usize,
    pub seed: u64,
    #[serde(skip)]
    cache: OnceLock<Vec<Point>>,
}

impl McOracle {
    pub const DEFAULT_SAMPLES: usize = 100_000;

    pub fn new(samples: usize, seed: u64) -> Self {
        McOracle {
            samples: samples.max(1),
            seed,
            cache: OnceLock::new(),
        }
    }

    pub fn reference(&self, draw: impl Fn(&mut ChaCha8Rng) -> Point) -> &[Point] {
        self.cache.get_or_init(|| {
            let mut rng = crate::rng::labeled_stream(self.seed, "reference", 0);
            (0..self.samples).map(|_| draw(&mut rng)).collect()
        })
    }

    pub fn ball_measure<'a>(
        &self,
        space: &Space,
        reference: impl FnOnce() -> &'a [Point],
        x: &Point,
        r: f64,
        closed: bool,
    ) -> Result<Estimate, MeasureError> {
        let pts = reference();
        let mut hits = 0usize;
        for p in pts {
            let d = space.distance(x, p)?;
            if d < r || (closed && d == r) {
                hits += 1;
            }
        }
        Ok(Estimate::proportion(hits, pts.len()))
    }

    /// `r_α` of the empirical reference measure: the `⌈αM⌉`-th smallest
    /// distance from `x`.
    pub fn alpha_ball(&self, space: &Space, reference: &[Point], x: &Point, alpha: f64) -> Result<AlphaBall, MeasureError> {
        let mut d: Vec<f64> = reference
            .iter()
            .map(|p| space.distance(x, p))
            .collect::<Result<_, _>>()?;
        let m = d.len();
        let k = ((alpha * m as f64).ceil() as usize).clamp(1, m);
        let (_, kth, _) = d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        let radius = *kth;
        let open = d.iter().filter(|&&v| v < radius).count();
        let closed = d.iter().filter(|&&v| v <= radius).count();
        Ok(AlphaBall {
            radius,
            open_mass: open as f64 / m as f64,
            closed_mass: closed as f64 / m as f64,
        })
    }
}

/// Uniform measure on `[0,1]^dim`. Ball measures are exact for `dim ≤ 2`;
/// higher dimensions go through the Monte-Carlo oracle.
#[derive(Debug, Clone, Serialize)]
pub struct UniformCube {
    pub dim: usize,
    pub oracle: McOracle,
}

impl UniformCube {
    pub fn new(dim: usize) -> Result<Self, MeasureError> {
        Self::with_oracle(dim, McOracle::new(McOracle::DEFAULT_SAMPLES, 0))
    }

    pub fn with_oracle(dim: usize, oracle: McOracle) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::BadModel("cube dimension must be at least 1".into()));
        }
        Ok(UniformCube { dim, oracle })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::Euclidean {
            coords: (0..self.dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    /// Exact `μ(B(x, r))` for `dim ≤ 2` (open and closed balls agree).
    /// Returns NaN in higher dimensions.
    pub fn ball_measure(&self, x: &Point, r: f64) -> f64 {
        let c = match x.as_coords() {
            Some(c) => c,
            None => return f64::NAN,
        };
        match self.dim {
            1 => interval_length(c[0], r),
            2 => disc_square_area(c[0], c[1], r),
            _ => f64::NAN,
        }
    }

    /// Bisection on `r ↦ μ(B(x, r))`, which is continuous. The upper end
    /// of the bracket is the distance to the farthest corner.
    pub fn alpha_ball(&self, x: &Point, alpha: f64) -> AlphaBall {
        let c = x.as_coords().unwrap_or(&[]);
        let mut hi = c
            .iter()
            .map(|v| v.abs().max((v - 1.0).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE)
            * (1.0 + 1e-12);
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ball_measure(x, mid) >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mass = self.ball_measure(x, hi);
        AlphaBall {
            radius: hi,
            open_mass: mass,
            closed_mass: mass,
        }
    }
}

fn interval_length(x: f64, r: f64) -> f64 {
    ((x + r).min(1.0) - (x - r).max(0.0)).max(0.0)
}

/// `∫ h(t) dt` for `h(t) = sqrt(r² - t²)`.
fn semicircle_primitive(t: f64, r: f64) -> f64 {
    let t = t.clamp(-r, r);
    0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).clamp(-1.0, 1.0).asin())
}

/// `∫_{t1}^{t2} min(a, sqrt(r² - t²)) dt` for `-r ≤ t1 ≤ t2 ≤ r`, `a ≥ 0`.
fn clipped_chord_integral(a: f64, r: f64, t1: f64, t2: f64) -> f64 {
    if t2 <= t1 {
        return 0.0;
    }
    if a >= r {
        return semicircle_primitive(t2, r) - semicircle_primitive(t1, r);
    }
    // sqrt(r² - t²) ≥ a exactly on [-s, s]
    let s = (r * r - a * a).sqrt();
    let flat = |u: f64, v: f64| a * (v - u).max(0.0);
    let curved = |u: f64, v: f64| {
        if v <= u {
            0.0
        } else {
            semicircle_primitive(v, r) - semicircle_primitive(u, r)
        }
    };
    curved(t1, t2.min(-s)) + flat(t1.max(-s), t2.min(s)) + curved(t1.max(s), t2)
}

/// Area of the disc of radius `r` about `(cx, cy)` inside `[0,1]²`.
///
/// Integrates over `t = x - cx` the length of the vertical chord clipped to
/// `[0, 1]`, which is `clip(1 - cy) - clip(-cy)` with `clip(c)` the
/// projection of `c` onto `[-h(t), h(t)]`.
pub fn disc_square_area(cx: f64, cy: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let t1 = (-cx).max(-r);
    let t2 = (1.0 - cx).min(r);
    if t2 <= t1 {
        return 0.0;
    }
    let signed = |c: f64| {
        let v = clipped_chord_integral(c.abs(), r, t1, t2);
        if c >= 0.0 {
            v
        } else {
            -v
        }
    };
    (signed(1.0 - cy) - signed(-cy)).clamp(0.0, 1.0)
}

/// An isotropic Gaussian component with the probability `label` that a
/// point drawn from it is labelled 1.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sd: f64,
    pub label: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianMixture {
    pub dim: usize,
    pub components: Vec<GaussianComponent>,
    pub oracle: McOracle,
}

impl GaussianMixture {
    pub fn new(dim: usize, components: Vec<GaussianComponent>, oracle: McOracle) -> Result<Self, MeasureError> {
        if dim == 0 || components.is_empty() {
            return Err(MeasureError::BadModel("mixture needs a dimension and components".into()));
        }
        for c in &components {
            if c.mean.len() != dim {
                return Err(MeasureError::BadModel(format!(
                    "component mean has dimension {}, expected {dim}",
                    c.mean.len()
                )));
            }
            if !(c.sd > 0.0) || !(c.weight > 0.0) || !(0.0..=1.0).contains(&c.label) {
                return Err(MeasureError::BadModel(
                    "components need sd > 0, weight > 0 and label probability in [0,1]".into(),
                ));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MeasureError::BadModel(format!("component weights sum to {total}, not 1")));
        }
        Ok(GaussianMixture {
            dim,
            components,
            oracle,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = &self.components[pick];
        Point::Euclidean {
            coords: c
                .mean
                .iter()
                .map(|m| {
                    let n: f64 = StandardNormal.sample(rng);
                    m + c.sd * n
                })
                .collect(),
        }
    }

    /// Unnormalised component densities `w_c φ_c(x)` (the common factor
    /// `(2π)^{-d/2}` is dropped).
    fn weighted_densities<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.components.iter().map(move |c| {
            let sq: f64 = x.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
            let dens = c.weight * (-0.5 * sq / (c.sd * c.sd)).exp() / c.sd.powi(self.dim as i32);
            (dens, c.label)
        })
    }

    /// `P(Y = 1 | X = x)`.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (d, l) in self.weighted_densities(x) {
            num += d * l;
            den += d;
        }
        if den > 0.0 {
            num / den
        } else {
            // far in the tails: the component with the widest spread wins
            let c = self
                .components
                .iter()
                .max_by(|a, b| a.sd.total_cmp(&b.sd))
                .expect("nonempty");
            c.label
        }
    }

    /// `(density of label 1, density of label 0)` at `x`, normalised.
    pub(crate) fn class_densities(&self, x: &[f64]) -> (f64, f64) {
        let norm = (2.0 * std::f64::consts::PI).powf(-(self.dim as f64) / 2.0);
        let (mut one, mut zero) = (0.0, 0.0);
        for (d, l) in self.weighted_densities(x) {
            one += d * l;
            zero += d * (1.0 - l);
        }
        (one * norm, zero * norm)
    }
}

/// Uniform measure on the box `[-h, h]³` of the Heisenberg group.
#[derive(Debug, Clone, Serialize)]
pub struct HeisenbergBox {
    pub half_width: f64,
    pub oracle: McOracle,
}

impl HeisenbergBox {
    pub fn new(half_width: f64, oracle: McOracle) -> Result<Self, MeasureError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(MeasureError::BadModel(format!("box half-width must be positive, got {half_width}")));
        }
        Ok(HeisenbergBox { half_width, oracle })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let h = self.half_width;
        let mut c = || h * (2.0 * rng.random::<f64>() - 1.0);
        Point::Heis(HeisPoint {
            x: c(),
            y: c(),
            z: c(),
        })
    }
}
