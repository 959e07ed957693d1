//! Metric spaces and their exact distance functions.
//!
//! Four spaces are supported:
//!
//! * `Euclidean(d)`: real vectors with the usual norm.
//! * `UltrametricSeq`: finite symbol strings with `d(x, y) = 2^-i`, where `i`
//!   is the (1-based) first index at which the strings differ.
//! * `NestedBall`: the countable set `{x_0} ∪ {x_n : n ≥ 1}` with
//!   `d(x_n, x_m) = max{r_n, r_m}` and `d(x_0, x_n) = r_n`, `r_n = ratio^n`.
//! * `Heisenberg`: `R^3` with the group law
//!   `(x,y,z)·(x',y',z') = (x+x', y+y', z+z' - 2xy' + 2yx')` and the
//!   left-invariant gauge distance `d(p, q) = |p^-1 · q|`, where
//!   `|(x,y,z)| = ((x²+y²)² + z²)^(1/4)`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point variant {point} does not belong to space {space}")]
    Mismatch {
        space: &'static str,
        point: &'static str,
    },
    #[error("euclidean dimension mismatch: space has {expected}, point has {found}")]
    Dimension { expected: usize, found: usize },
    #[error("nested-ball index {0} is too deep: its radius underflows to zero")]
    TooDeep(u64),
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),
    #[error("invalid space parameter: {0}")]
    InvalidSpace(String),
}

/// A point in the Heisenberg group, in exponential coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisPoint {
    pub const IDENTITY: HeisPoint = HeisPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        HeisPoint { x, y, z }
    }
}

/// Group product with the `C = -2` convention.
pub fn heis_mul(p: HeisPoint, q: HeisPoint) -> HeisPoint {
    HeisPoint {
        x: p.x + q.x,
        y: p.y + q.y,
        z: p.z + q.z - 2.0 * p.x * q.y + 2.0 * p.y * q.x,
    }
}

pub fn heis_inv(p: HeisPoint) -> HeisPoint {
    HeisPoint {
        x: -p.x,
        y: -p.y,
        z: -p.z,
    }
}

/// The gauge `((x²+y²)² + z²)^(1/4)`.
pub fn heis_norm(p: HeisPoint) -> f64 {
    let h = p.x.hypot(p.y);
    // (h^4 + z^2)^(1/4) = sqrt(hypot(h^2, z)); avoids overflow of h^4
    (h * h).hypot(p.z).sqrt()
}

/// Anisotropic dilation `(x, y, z) -> (tx, ty, t²z)`.
pub fn heis_dilate(p: HeisPoint, t: f64) -> Result<HeisPoint, MetricError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(MetricError::NonPositiveDilation(t));
    }
    Ok(HeisPoint {
        x: t * p.x,
        y: t * p.y,
        z: t * t * p.z,
    })
}

/// Cygan–Korányi distance `|p^-1 · q|`.
pub fn heis_distance(p: HeisPoint, q: HeisPoint) -> f64 {
    heis_norm(heis_mul(heis_inv(p), q))
}

/// `x` as an integer multiple of `2^-1074` (exact for every finite double).
fn subnormal_units(x: f64) -> BigInt {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (mant, shift) = if exp == 0 { (frac, 0) } else { (frac | (1 << 52), exp - 1) };
    let v = BigInt::from(mant) << (shift as usize);
    if x.is_sign_negative() {
        -v
    } else {
        v
    }
}

/// `d(p, q)⁴` in units of `2^-4296`, exact.
fn gauge4_units(p: HeisPoint, q: HeisPoint) -> BigInt {
    let u = subnormal_units;
    let (px, py, pz) = (u(p.x), u(p.y), u(p.z));
    let (qx, qy, qz) = (u(q.x), u(q.y), u(q.z));
    let dx = &qx - &px;
    let dy = &qy - &py;
    // everything at scale 2^-2148
    let planar = &dx * &dx + &dy * &dy;
    let vertical: BigInt = ((&qz - &pz) << 1074usize) + ((&px * &qy - &py * &qx) << 1usize);
    &planar * &planar + &vertical * &vertical
}

/// Exact comparison of `d(p, q)` with `r`, evaluated on the binary values
/// of the coordinates. Compares `d⁴` with `r⁴` in integer arithmetic, so
/// it stays correct when the two differ far below double precision.
pub fn heis_compare_distance(p: HeisPoint, q: HeisPoint, r: f64) -> Ordering {
    if r < 0.0 {
        return Ordering::Greater;
    }
    let r = subnormal_units(r);
    let r2 = &r * &r;
    gauge4_units(p, q).cmp(&(&r2 * &r2))
}

/// Exact comparison of `d(p, q)` with the gauge `|g|`.
pub fn heis_compare_distance_to_norm(p: HeisPoint, q: HeisPoint, g: HeisPoint) -> Ordering {
    gauge4_units(p, q).cmp(&gauge4_units(HeisPoint::IDENTITY, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Point {
    Euclidean { coords: Vec<f64> },
    Seq { symbols: Vec<u8> },
    /// `index = 0` is the limit point `x_0`.
    Nested { index: u64 },
    Heis(HeisPoint),
}

impl Point {
    pub fn euclidean(coords: impl Into<Vec<f64>>) -> Self {
        Point::Euclidean {
            coords: coords.into(),
        }
    }

    pub fn seq(symbols: impl Into<Vec<u8>>) -> Self {
        Point::Seq {
            symbols: symbols.into(),
        }
    }

    pub const fn nested(index: u64) -> Self {
        Point::Nested { index }
    }

    pub const fn heis(x: f64, y: f64, z: f64) -> Self {
        Point::Heis(HeisPoint { x, y, z })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Point::Euclidean { .. } => "euclidean",
            Point::Seq { .. } => "seq",
            Point::Nested { .. } => "nested",
            Point::Heis(_) => "heisenberg",
        }
    }

    /// First coordinate of a Euclidean or Heisenberg point.
    pub fn first_coord(&self) -> Option<f64> {
        match self {
            Point::Euclidean { coords } => coords.first().copied(),
            Point::Heis(h) => Some(h.x),
            _ => None,
        }
    }

    pub fn as_coords(&self) -> Option<&[f64]> {
        match self {
            Point::Euclidean { coords } => Some(coords),
            _ => None,
        }
    }

    /// Plain-text rendering used in CSV output.
    pub fn render(&self) -> String {
        match self {
            Point::Euclidean { coords } => coords
                .iter()
                .map(|c| format!("{c}"))
                .collect::<Vec<_>>()
                .join(";"),
            Point::Seq { symbols } => symbols.iter().map(|s| s.to_string()).collect(),
            Point::Nested { index } => format!("x{index}"),
            Point::Heis(h) => format!("{};{};{}", h.x, h.y, h.z),
        }
    }
}

/// Radii `r_n = ratio^n` of the nested-ball space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedBallSpace {
    pub ratio: f64,
}

impl Default for NestedBallSpace {
    fn default() -> Self {
        NestedBallSpace { ratio: 0.5 }
    }
}

impl NestedBallSpace {
    pub fn new(ratio: f64) -> Result<Self, MetricError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(MetricError::InvalidSpace(format!(
                "nested-ball ratio must lie in (0,1), got {ratio}"
            )));
        }
        Ok(NestedBallSpace { ratio })
    }

    /// Largest index whose radius is still a positive double.
    pub fn max_index(&self) -> u64 {
        if self.ratio == 0.5 {
            return 1074;
        }
        // ratio^n > 0 as long as n * ln(ratio) stays above the subnormal floor
        let floor = (f64::MIN_POSITIVE * f64::EPSILON).ln();
        let mut n = (floor / self.ratio.ln()).floor() as u64;
        while n > 0 && self.ratio.powi(n as i32) == 0.0 {
            n -= 1;
        }
        n
    }

    /// `r_n` for `n ≥ 1`.
    pub fn radius(&self, n: u64) -> Result<f64, MetricError> {
        if n > self.max_index() {
            return Err(MetricError::TooDeep(n));
        }
        let r = if self.ratio == 0.5 {
            dyadic(n as usize)
        } else {
            self.ratio.powi(n as i32)
        };
        if r > 0.0 {
            Ok(r)
        } else {
            Err(MetricError::TooDeep(n))
        }
    }

    /// Index `min{a, b}` (with `0` read as infinity) whose radius is the
    /// distance between `x_a` and `x_b`; `None` when `a == b`.
    pub fn distance_rank(a: u64, b: u64) -> Option<u64> {
        match (a, b) {
            _ if a == b => None,
            (0, n) | (n, 0) => Some(n),
            (a, b) => Some(a.min(b)),
        }
    }
}

/// Key of a nested-ball rank (see [`Space::distance_key`]).
pub fn nested_rank_key(rank: Option<u64>) -> f64 {
    match rank {
        None => f64::NEG_INFINITY,
        Some(n) => -(n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    Euclidean { dim: usize },
    UltrametricSeq,
    NestedBall(NestedBallSpace),
    Heisenberg,
}

impl Space {
    pub fn name(&self) -> &'static str {
        match self {
            Space::Euclidean { .. } => "euclidean",
            Space::UltrametricSeq => "ultrametric_seq",
            Space::NestedBall(_) => "nested_ball",
            Space::Heisenberg => "heisenberg",
        }
    }

    pub fn is_ultrametric(&self) -> bool {
        matches!(self, Space::UltrametricSeq | Space::NestedBall(_))
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, MetricError> {
        match (self, p, q) {
            (Space::Euclidean { dim }, Point::Euclidean { coords: a }, Point::Euclidean { coords: b }) => {
                if a.len() != *dim || b.len() != *dim {
                    let found = if a.len() != *dim { a.len() } else { b.len() };
                    return Err(MetricError::Dimension {
                        expected: *dim,
                        found,
                    });
                }
                Ok(euclidean_distance(a, b))
            }
            (Space::UltrametricSeq, Point::Seq { symbols: a }, Point::Seq { symbols: b }) => {
                Ok(seq_distance(a, b))
            }
            (Space::NestedBall(nb), Point::Nested { index: a }, Point::Nested { index: b }) => {
                match NestedBallSpace::distance_rank(*a, *b) {
                    None => Ok(0.0),
                    Some(n) => nb.radius(n),
                }
            }
            (Space::Heisenberg, Point::Heis(a), Point::Heis(b)) => Ok(heis_distance(*a, *b)),
            (space, p, q) => {
                let point = if self.accepts(p) {
                    q.variant_name()
                } else {
                    p.variant_name()
                };
                Err(MetricError::Mismatch {
                    space: space.name(),
                    point,
                })
            }
        }
    }

    /// Order-preserving stand-in for [`Space::distance`] that never
    /// underflows. It is the distance itself except on the nested-ball
    /// space, where points at rank `n` get `-n` and equal points `-∞`.
    pub fn distance_key(&self, p: &Point, q: &Point) -> Result<f64, MetricError> {
        match (self, p, q) {
            (Space::NestedBall(_), Point::Nested { index: a }, Point::Nested { index: b }) => {
                Ok(nested_rank_key(NestedBallSpace::distance_rank(*a, *b)))
            }
            _ => self.distance(p, q),
        }
    }

    /// Distance represented by a key; nested radii below the double range
    /// come out as `0`.
    pub fn key_to_distance(&self, key: f64) -> f64 {
        match self {
            Space::NestedBall(nb) => {
                if key == f64::NEG_INFINITY {
                    0.0
                } else {
                    nb.radius((-key) as u64).unwrap_or(0.0)
                }
            }
            _ => key,
        }
    }

    pub fn accepts(&self, p: &Point) -> bool {
        matches!(
            (self, p),
            (Space::Euclidean { .. }, Point::Euclidean { .. })
                | (Space::UltrametricSeq, Point::Seq { .. })
                | (Space::NestedBall(_), Point::Nested { .. })
                | (Space::Heisenberg, Point::Heis(_))
        )
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// 1-based index of the first differing symbol; strings of unequal length
/// behave as if padded with a symbol outside the alphabet.
pub fn first_difference(a: &[u8], b: &[u8]) -> Option<usize> {
    match a.iter().zip(b).position(|(x, y)| x != y) {
        Some(i) => Some(i + 1),
        None if a.len() == b.len() => None,
        None => Some(a.len().min(b.len()) + 1),
    }
}

pub fn seq_distance(a: &[u8], b: &[u8]) -> f64 {
    match first_difference(a, b) {
        None => 0.0,
        Some(i) => dyadic(i),
    }
}

/// `2^-i` as an exact double.
pub(crate) fn dyadic(i: usize) -> f64 {
    match i {
        0..=1022 => f64::from_bits((1023 - i as u64) << 52),
        1023..=1074 => f64::from_bits(1u64 << (1074 - i)),
        _ => 0.0,
    }
}
