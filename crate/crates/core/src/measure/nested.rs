//! The nested-ball model: atoms `x_n` of mass `1/(n(n+1))`, `n ≥ 1`, on the
//! space where `d(x_n, x_m) = max{r_n, r_m}` and `d(x_0, x_n) = r_n`.
//!
//! The open balls `B_n = B(x_n, r_n) = {x_n}` are pairwise disjoint, the
//! spheres `S_n = S(x_n, r_n) = {x_0} ∪ {x_m : m > n}` are nested with
//! `μ(S_n) = 1/(n+1)`, and the set `D(x_0, 0, 3α)` has measure of order
//! `α ln(1/α)` instead of `O(α)`.
//!
//! Radii are handled through their indices: `r_i < r_j` iff `i > j`.

use rand::Rng;
use serde::Serialize;

use super::{AlphaBall, MeasureError};
use crate::metric::{NestedBallSpace, Point};

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct NestedBallModel {
    pub space: NestedBallSpace,
}

/// `r_α(x_a)` expressed by index: `rank = None` means radius zero,
/// `Some(m)` means radius `r_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedAlpha {
    pub rank: Option<u64>,
    pub open_mass: f64,
    pub closed_mass: f64,
}

impl NestedAlpha {
    pub fn sphere_mass(&self) -> f64 {
        (self.closed_mass - self.open_mass).max(0.0)
    }
}

/// `1/(n(n+1))`, the mass of `x_n`.
pub(crate) fn atom_mass(n: u64) -> f64 {
    let n = n as f64;
    1.0 / (n * (n + 1.0))
}

/// `1/n`: mass of `{x_0} ∪ {x_m : m ≥ n}`.
fn tail_mass(n: u64) -> f64 {
    1.0 / n as f64
}

/// Largest `m ≥ 1` with `1/m ≥ α`, evaluated with the same floating-point
/// expression used for the masses so that comparisons stay consistent.
pub(crate) fn largest_index_with_mass(alpha: f64) -> u64 {
    let mut m = (1.0 / alpha).floor().max(1.0) as u64;
    while m > 1 && tail_mass(m) < alpha {
        m -= 1;
    }
    while tail_mass(m + 1) >= alpha {
        m += 1;
    }
    m
}

impl NestedBallModel {
    pub fn new(space: NestedBallSpace) -> Self {
        NestedBallModel { space }
    }

    /// `N = ⌊1/V⌋` with `V` uniform on `(0, 1]` has `P(N ≥ m) = 1/m`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let v = 1.0 - rng.random::<f64>();
        let n = (1.0 / v).floor();
        Point::nested(if n >= u64::MAX as f64 { u64::MAX } else { n as u64 })
    }

    fn index_of(x: &Point) -> Result<u64, MeasureError> {
        match x {
            Point::Nested { index } => Ok(*index),
            other => Err(MeasureError::PointOutsideModel(other.render())),
        }
    }

    /// Smallest index `m ≥ 1` with `r_m < r` (or `≤ r` when `closed`);
    /// `None` when no radius qualifies within the representable range.
    fn first_index_below(&self, r: f64, closed: bool) -> Option<u64> {
        let ok = |m: u64| match self.space.radius(m) {
            Ok(rm) => rm < r || (closed && rm == r),
            Err(_) => true,
        };
        if ok(1) {
            return Some(1);
        }
        if r <= 0.0 {
            return None;
        }
        // r_m = ratio^m: start from the logarithmic estimate and correct
        let guess = (r.ln() / self.space.ratio.ln()).floor().max(1.0) as u64;
        let mut m = guess.min(self.space.max_index() + 1);
        while m > 1 && ok(m - 1) {
            m -= 1;
        }
        while !ok(m) {
            m += 1;
        }
        Some(m)
    }

    pub fn ball_measure(&self, x: &Point, r: f64, closed: bool) -> Result<f64, MeasureError> {
        let a = Self::index_of(x)?;
        if r == 0.0 {
            return Ok(if closed && a > 0 { atom_mass(a) } else { 0.0 });
        }
        let below = self.first_index_below(r, closed);
        Ok(match (a, below) {
            (0, Some(m)) => tail_mass(m),
            (0, None) => 0.0,
            (a, Some(m)) if m <= a => tail_mass(m),
            // r ≤ r_a (or < r_a when closed): only the atom itself
            (a, _) => atom_mass(a),
        })
    }

    pub fn nested_alpha(&self, a: u64, alpha: f64) -> NestedAlpha {
        if a == 0 {
            let m = largest_index_with_mass(alpha);
            return NestedAlpha {
                rank: Some(m),
                open_mass: tail_mass(m + 1),
                closed_mass: tail_mass(m),
            };
        }
        let own = atom_mass(a);
        if own >= alpha {
            return NestedAlpha {
                rank: None,
                open_mass: 0.0,
                closed_mass: own,
            };
        }
        let m = largest_index_with_mass(alpha).min(a);
        let open_mass = if m == a { own } else { tail_mass(m + 1) };
        NestedAlpha {
            rank: Some(m),
            open_mass,
            closed_mass: tail_mass(m),
        }
    }

    pub fn alpha_ball(&self, x: &Point, alpha: f64) -> Result<AlphaBall, MeasureError> {
        let na = self.nested_alpha(Self::index_of(x)?, alpha);
        let radius = match na.rank {
            None => 0.0,
            Some(m) => self.space.radius(m)?,
        };
        Ok(AlphaBall {
            radius,
            open_mass: na.open_mass,
            closed_mass: na.closed_mass,
        })
    }
}

/// Lower bound on `(μ⊗λ)(D(x_0, 0, 3α))` in the nested-ball model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NestedLowerBound {
    pub alpha: f64,
    /// First summation index `⌈α^{-1/2}⌉`.
    pub first: u64,
    /// Last summation index `⌊α^{-1}⌋ - 1`.
    pub last: u64,
    /// `α Σ_{n=first}^{last} 1/n`.
    pub exact: f64,
    /// `-(2/15) α ln α`.
    pub minorant: f64,
}

/// `α Σ_{n=⌈α^{-1/2}⌉}^{⌊α^{-1}⌋-1} 1/n` and its analytic minorant
/// `-(2/15) α ln α`. Integer parts are taken with a `1e-12` relative slack
/// so that decimal inputs such as `0.01` land on the intended integers.
pub fn nested_d_lower_bound(alpha: f64) -> Result<NestedLowerBound, MeasureError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MeasureError::Alpha {
            alpha,
            range: "(0, 1)",
        });
    }
    let slack = 1e-12;
    // smallest n with n² α ≥ 1
    let mut first = (1.0 / alpha.sqrt()).ceil() as u64;
    while first > 1 && ((first - 1) as f64).powi(2) * alpha >= 1.0 - slack {
        first -= 1;
    }
    while (first as f64).powi(2) * alpha < 1.0 - slack {
        first += 1;
    }
    // largest n with n α ≤ 1
    let mut floor_inv = (1.0 / alpha).floor() as u64;
    while (floor_inv as f64) * alpha > 1.0 + slack {
        floor_inv -= 1;
    }
    while ((floor_inv + 1) as f64) * alpha <= 1.0 + slack {
        floor_inv += 1;
    }
    let last = floor_inv.saturating_sub(1);
    if first > last {
        return Err(MeasureError::AlphaTooLarge(alpha));
    }
    // summed from the small terms up
    let sum: f64 = (first..=last).rev().map(|n| 1.0 / n as f64).sum();
    Ok(NestedLowerBound {
        alpha,
        first,
        last,
        exact: alpha * sum,
        minorant: -2.0 / 15.0 * alpha * alpha.ln(),
    })
}
