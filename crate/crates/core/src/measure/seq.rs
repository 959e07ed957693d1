use rand::Rng;
use serde::Serialize;

use super::discrete::alpha_ball_from_profile;
use super::{AlphaBall, MeasureError};
use crate::metric::{dyadic, Point};

/// I.i.d. symbols with distribution `probs` at each of `depth` positions,
/// on the space of strings with `d(x, y) = 2^-(first differing index)`.
/// With two equiprobable symbols this is the uniform measure on a depth-`L`
/// truncation of the Cantor space.
#[derive(Debug, Clone, Serialize)]
pub struct SeqProductModel {
    pub depth: usize,
    pub probs: Vec<f64>,
}

impl SeqProductModel {
    pub fn new(depth: usize, probs: Vec<f64>) -> Result<Self, MeasureError> {
        if depth == 0 || depth > 1000 {
            return Err(MeasureError::BadModel(format!("string depth must lie in 1..=1000, got {depth}")));
        }
        if probs.is_empty() || probs.len() > 256 {
            return Err(MeasureError::BadModel("alphabet must have 1..=256 symbols".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(MeasureError::BadModel("symbol probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MeasureError::BadModel(format!("symbol probabilities sum to {total}, not 1")));
        }
        Ok(SeqProductModel {
            depth,
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    pub fn uniform(depth: usize, alphabet: usize) -> Result<Self, MeasureError> {
        if alphabet == 0 {
            return Err(MeasureError::BadModel("empty alphabet".into()));
        }
        Self::new(depth, vec![1.0 / alphabet as f64; alphabet])
    }

    fn symbols(x: &Point) -> Result<&[u8], MeasureError> {
        match x {
            Point::Seq { symbols } => Ok(symbols),
            other => Err(MeasureError::PointOutsideModel(other.render())),
        }
    }

    fn prob(&self, s: u8) -> f64 {
        self.probs.get(s as usize).copied().unwrap_or(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let symbols: Vec<u8> = (0..self.depth)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (s, p) in self.probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return s as u8;
                    }
                }
                // rounding left u above the last partial sum
                self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u8
            })
            .collect();
        Point::Seq { symbols }
    }

    /// Mass of the strings agreeing with `x` on the first `m` positions.
    /// `m > depth` asks for `x` itself.
    fn prefix_mass(&self, x: &[u8], m: usize) -> f64 {
        if m > self.depth {
            if x.len() != self.depth {
                return 0.0;
            }
            return x.iter().map(|&s| self.prob(s)).product();
        }
        if x.len() < m {
            // agreement would require a padding symbol at position len+1
            return 0.0;
        }
        x[..m].iter().map(|&s| self.prob(s)).product()
    }

    pub fn ball_measure(&self, x: &Point, r: f64, closed: bool) -> Result<f64, MeasureError> {
        let x = Self::symbols(x)?;
        let within = |i: usize| {
            let d = dyadic(i);
            d < r || (closed && d == r)
        };
        if r == 0.0 {
            return Ok(if closed { self.prefix_mass(x, self.depth + 1) } else { 0.0 });
        }
        // d(x, y) = 2^-i is inside iff i ≥ i0; agreement on i0 - 1 symbols
        let cap = self.depth.max(x.len()) + 2;
        let i0 = (1..=cap).find(|&i| within(i)).unwrap_or(cap);
        Ok(self.prefix_mass(x, i0 - 1))
    }

    /// Distinct distances from `x` with closed-ball masses.
    pub fn profile(&self, x: &Point) -> Result<Vec<(f64, f64)>, MeasureError> {
        let s = Self::symbols(x)?;
        let top = self.depth.max(s.len()) + 1;
        let mut out = vec![(0.0, self.prefix_mass(s, self.depth + 1))];
        for i in (1..=top).rev() {
            out.push((dyadic(i), self.prefix_mass(s, i - 1)));
        }
        Ok(out)
    }

    pub fn alpha_ball(&self, x: &Point, alpha: f64) -> Result<AlphaBall, MeasureError> {
        Ok(alpha_ball_from_profile(&self.profile(x)?, alpha))
    }

    /// Every string of the support with its mass; `None` when there are
    /// more than `limit` of them.
    pub fn support(&self, limit: usize) -> Option<Vec<(Point, f64)>> {
        let symbols: Vec<u8> = (0..self.probs.len() as u16)
            .filter(|&s| self.probs[s as usize] > 0.0)
            .map(|s| s as u8)
            .collect();
        let count = (symbols.len() as f64).powi(self.depth as i32);
        if count > limit as f64 {
            return None;
        }
        let mut out: Vec<(Vec<u8>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..self.depth {
            out = out
                .into_iter()
                .flat_map(|(prefix, m)| {
                    symbols.iter().map(move |&s| {
                        let mut p = prefix.clone();
                        p.push(s);
                        (p, m * self.probs[s as usize])
                    })
                })
                .collect();
        }
        Some(out.into_iter().map(|(s, m)| (Point::Seq { symbols: s }, m)).collect())
    }
}
