//! Balls, disconnected ball families and dimension witnesses.
//!
//! A family of balls is *disconnected* when no ball contains the centre of
//! another one. A disconnected family whose balls all share a common point
//! of multiplicity `N` certifies that the space cannot have Nagata dimension
//! below `N - 1` on any scale exceeding the radii;
//! [`crate::koranyi::koranyi_reimann_family`]
//! builds such families in the Heisenberg group for every `N`.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::metric::{
    heis_compare_distance, heis_compare_distance_to_norm, heis_norm, HeisPoint, MetricError, Point, Space,
};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("all balls must share one radius; found {0} and {1}")]
    UnequalRadii(f64, f64),
    #[error("candidate {index} lies outside the closed ball (distance {distance} > {radius})")]
    OutsideBall {
        index: usize,
        distance: f64,
        radius: f64,
    },
    #[error("radius must be a nonnegative finite number, got {0}")]
    BadRadius(f64),
    #[error("shrink factor must lie in (0,1), got {0}")]
    BadShrink(f64),
    #[error("family size must be at least 1")]
    EmptyFamily,
    #[error("radius search for ball {j} did not terminate after {iterations} shrink steps")]
    ShrinkLoop { j: usize, iterations: usize },
    #[error("ball {j} falls below the exactly representable range")]
    Underflow { j: usize },
    #[error("witness point is contained in no ball of the family")]
    NoMultiplicity,
    #[error("ball radius {radius} is not below the scale {scale}")]
    RadiusAboveScale { radius: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub closed: bool,
    /// Heisenberg only: the radius is exactly `|g|` for this point and
    /// `radius` holds its rounded value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_gauge: Option<HeisPoint>,
}

impl Ball {
    pub fn closed(center: Point, radius: f64) -> Self {
        Ball {
            center,
            radius,
            closed: true,
            radius_gauge: None,
        }
    }

    pub fn open(center: Point, radius: f64) -> Self {
        Ball {
            center,
            radius,
            closed: false,
            radius_gauge: None,
        }
    }

    /// Closed Heisenberg ball whose radius is exactly the gauge of `g`.
    pub fn closed_with_gauge_radius(center: HeisPoint, g: HeisPoint) -> Self {
        Ball {
            center: Point::Heis(center),
            radius: heis_norm(g),
            closed: true,
            radius_gauge: Some(g),
        }
    }
}

/// Membership test. The open ball of radius 0 is empty and the closed one is
/// `{center}`, which is what the strict/non-strict comparison gives anyway.
/// Heisenberg balls use the exact comparison of [`heis_compare_distance`].
pub fn ball_contains(space: &Space, ball: &Ball, p: &Point) -> Result<bool, MetricError> {
    if let (Space::Heisenberg, Point::Heis(c), Point::Heis(q)) = (space, &ball.center, p) {
        let ord = match ball.radius_gauge {
            Some(g) => heis_compare_distance_to_norm(*c, *q, g),
            None => heis_compare_distance(*c, *q, ball.radius),
        };
        return Ok(ord == Ordering::Less || (ball.closed && ord == Ordering::Equal));
    }
    let d = space.distance(&ball.center, p)?;
    Ok(if ball.closed {
        d <= ball.radius
    } else {
        d < ball.radius
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamily {
    pub space: Space,
    pub balls: Vec<Ball>,
}

impl BallFamily {
    pub fn new(space: Space, balls: Vec<Ball>) -> Self {
        BallFamily { space, balls }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn push(&mut self, ball: Ball) {
        self.balls.push(ball);
    }

    /// `m[i][j]` is true iff ball `j` contains the centre of ball `i`.
    pub fn containment_matrix(&self) -> Result<Vec<Vec<bool>>, MetricError> {
        self.balls
            .iter()
            .map(|bi| {
                self.balls
                    .iter()
                    .map(|bj| ball_contains(&self.space, bj, &bi.center))
                    .collect()
            })
            .collect()
    }
}

pub fn is_disconnected_family(family: &BallFamily) -> Result<bool, MetricError> {
    for (i, bi) in family.balls.iter().enumerate() {
        for (j, bj) in family.balls.iter().enumerate() {
            if i != j && ball_contains(&family.space, bj, &bi.center)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Number of balls of the family containing `p`.
pub fn multiplicity_at(family: &BallFamily, p: &Point) -> Result<usize, MetricError> {
    let mut count = 0;
    for b in &family.balls {
        if ball_contains(&family.space, b, p)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Maximal disconnected subfamily of an equal-radius family, chosen greedily
/// in list order. By maximality its balls cover every original centre.
pub fn greedy_disconnected_subfamily(family: &BallFamily) -> Result<BallFamily, GeometryError> {
    if let Some(first) = family.balls.first() {
        if let Some(other) = family.balls.iter().find(|b| b.radius != first.radius) {
            return Err(GeometryError::UnequalRadii(first.radius, other.radius));
        }
    }
    let mut kept: Vec<Ball> = Vec::new();
    'candidates: for ball in &family.balls {
        for k in &kept {
            if ball_contains(&family.space, k, &ball.center)?
                || ball_contains(&family.space, ball, &k.center)?
            {
                continue 'candidates;
            }
        }
        kept.push(ball.clone());
    }
    Ok(BallFamily::new(family.space, kept))
}

/// Certificate that `witness_point` lies in `multiplicity` balls of a family
/// whose radii are all below `scale`.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionWitness {
    pub family: BallFamily,
    pub witness_point: Point,
    pub multiplicity: usize,
    /// `f64::INFINITY` when no scale restriction applies.
    pub scale: f64,
}

impl DimensionWitness {
    pub fn new(family: BallFamily, witness_point: Point, scale: f64) -> Result<Self, GeometryError> {
        if let Some(b) = family.balls.iter().find(|b| !(b.radius < scale)) {
            return Err(GeometryError::RadiusAboveScale {
                radius: b.radius,
                scale,
            });
        }
        let multiplicity = multiplicity_at(&family, &witness_point)?;
        if multiplicity == 0 {
            return Err(GeometryError::NoMultiplicity);
        }
        Ok(DimensionWitness {
            family,
            witness_point,
            multiplicity,
            scale,
        })
    }

    /// Nagata dimension lower bound implied by a disconnected family:
    /// multiplicity `m` rules out dimension `≤ m - 2`.
    pub fn nagata_lower_bound(&self) -> Result<usize, MetricError> {
        Ok(if is_disconnected_family(&self.family)? {
            self.multiplicity.saturating_sub(1)
        } else {
            0
        })
    }
}

/// Points of a closed `r`-ball that are pairwise more than `r` apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeGrootWitness {
    /// Indices into the candidate list, ascending.
    pub indices: Vec<usize>,
    pub points: Vec<Point>,
    /// False when the greedy heuristic was used; the size is then only a
    /// lower bound on the largest separated subset.
    pub exhaustive: bool,
}

impl DeGrootWitness {
    /// The dimension bound this witness violates: `|witness| - 1`.
    pub fn delta(&self) -> usize {
        self.points.len() - 1
    }
}

pub const DE_GROOT_EXHAUSTIVE_LIMIT: usize = 20;

/// Largest subset of `candidates` whose points are pairwise at distance `> r`.
///
/// Candidates must lie in the closed ball `B̄(center, r)`. Returns `None`
/// when no pair is separated. Exhaustive up to
/// [`DE_GROOT_EXHAUSTIVE_LIMIT`] candidates, greedy farthest-point beyond.
pub fn de_groot_violation(
    space: &Space,
    center: &Point,
    r: f64,
    candidates: &[Point],
) -> Result<Option<DeGrootWitness>, GeometryError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(GeometryError::BadRadius(r));
    }
    for (index, c) in candidates.iter().enumerate() {
        let distance = space.distance(center, c)?;
        if distance > r {
            return Err(GeometryError::OutsideBall {
                index,
                distance,
                radius: r,
            });
        }
    }
    let n = candidates.len();
    let mut far = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let sep = space.distance(&candidates[i], &candidates[j])? > r;
            far[i][j] = sep;
            far[j][i] = sep;
        }
    }
    let (indices, exhaustive) = if n <= DE_GROOT_EXHAUSTIVE_LIMIT {
        (max_separated_exhaustive(&far), true)
    } else {
        (max_separated_greedy(space, candidates, &far)?, false)
    };
    if indices.len() < 2 {
        return Ok(None);
    }
    let points = indices.iter().map(|&i| candidates[i].clone()).collect();
    Ok(Some(DeGrootWitness {
        indices,
        points,
        exhaustive,
    }))
}

/// Maximum clique of the "separated" graph by branch and bound on bitmasks.
fn max_separated_exhaustive(far: &[Vec<bool>]) -> Vec<usize> {
    let n = far.len();
    let adj: Vec<u32> = (0..n)
        .map(|i| (0..n).filter(|&j| far[i][j]).fold(0u32, |m, j| m | (1 << j)))
        .collect();

    fn grow(adj: &[u32], current: u32, candidates: u32, best: &mut u32) {
        if candidates == 0 {
            if current.count_ones() > best.count_ones() {
                *best = current;
            }
            return;
        }
        if current.count_ones() + candidates.count_ones() <= best.count_ones() {
            return;
        }
        let v = candidates.trailing_zeros() as usize;
        let bit = 1u32 << v;
        grow(adj, current | bit, candidates & adj[v], best);
        grow(adj, current, candidates & !bit, best);
    }

    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut best = 0u32;
    if n > 0 {
        best = 1;
    }
    grow(&adj, 0, all, &mut best);
    (0..n).filter(|&i| best & (1 << i) != 0).collect()
}

/// Farthest-point heuristic: start from the most separated pair and keep
/// adding the candidate farthest from the chosen set that stays separated.
fn max_separated_greedy(
    space: &Space,
    candidates: &[Point],
    far: &[Vec<bool>],
) -> Result<Vec<usize>, MetricError> {
    let n = candidates.len();
    let mut best_pair = None;
    let mut best_d = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            if far[i][j] {
                let d = space.distance(&candidates[i], &candidates[j])?;
                if d > best_d {
                    best_d = d;
                    best_pair = Some((i, j));
                }
            }
        }
    }
    let Some((a, b)) = best_pair else {
        return Ok(vec![0]);
    };
    let mut chosen = vec![a, b];
    loop {
        let mut pick = None;
        let mut pick_d = f64::NEG_INFINITY;
        for c in 0..n {
            if chosen.contains(&c) || !chosen.iter().all(|&s| far[c][s]) {
                continue;
            }
            let mut d_min = f64::INFINITY;
            for &s in &chosen {
                d_min = d_min.min(space.distance(&candidates[c], &candidates[s])?);
            }
            if d_min > pick_d {
                pick_d = d_min;
                pick = Some(c);
            }
        }
        match pick {
            Some(c) => chosen.push(c),
            None => break,
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::metric::NestedBallSpace;

    fn e2(x: f64, y: f64) -> Point {
        Point::euclidean([x, y])
    }

    #[test]
    fn contains_boundary_and_degenerate_balls() {
        let s = Space::Euclidean { dim: 2 };
        assert!(ball_contains(&s, &Ball::closed(e2(0.0, 0.0), 1.0), &e2(1.0, 0.0)).unwrap());
        assert!(!ball_contains(&s, &Ball::open(e2(0.0, 0.0), 1.0), &e2(1.0, 0.0)).unwrap());
        assert!(ball_contains(&s, &Ball::closed(e2(0.5, 0.5), 0.0), &e2(0.5, 0.5)).unwrap());
        assert!(!ball_contains(&s, &Ball::open(e2(0.5, 0.5), 0.0), &e2(0.5, 0.5)).unwrap());
    }

    #[test]
    fn disconnected_examples() {
        let s = Space::Euclidean { dim: 2 };
        let apart = BallFamily::new(s, vec![Ball::closed(e2(0.0, 0.0), 1.0), Ball::closed(e2(3.0, 0.0), 1.0)]);
        assert!(is_disconnected_family(&apart).unwrap());
        let touching = BallFamily::new(s, vec![Ball::closed(e2(0.0, 0.0), 1.0), Ball::closed(e2(1.0, 0.0), 1.0)]);
        assert!(!is_disconnected_family(&touching).unwrap());
    }

    #[test]
    fn multiplicity_examples() {
        let s = Space::Euclidean { dim: 2 };
        let empty = BallFamily::new(s, vec![]);
        assert_eq!(multiplicity_at(&empty, &e2(0.0, 0.0)).unwrap(), 0);
        let apart = BallFamily::new(s, vec![Ball::closed(e2(0.0, 0.0), 1.0), Ball::closed(e2(3.0, 0.0), 1.0)]);
        assert_eq!(multiplicity_at(&apart, &e2(0.2, 0.0)).unwrap(), 1);
    }

    #[test]
    fn greedy_subfamily_hand_check() {
        let s = Space::Euclidean { dim: 2 };
        let fam = BallFamily::new(
            s,
            vec![
                Ball::closed(e2(0.0, 0.0), 1.0),
                Ball::closed(e2(0.5, 0.0), 1.0),
                Ball::closed(e2(3.0, 0.0), 1.0),
            ],
        );
        let sub = greedy_disconnected_subfamily(&fam).unwrap();
        let centers: Vec<_> = sub.balls.iter().map(|b| b.center.clone()).collect();
        assert_eq!(centers, vec![e2(0.0, 0.0), e2(3.0, 0.0)]);

        let single = BallFamily::new(s, vec![Ball::closed(e2(1.0, 1.0), 0.5)]);
        assert_eq!(greedy_disconnected_subfamily(&single).unwrap(), single);

        let apart = BallFamily::new(s, vec![Ball::closed(e2(0.0, 0.0), 1.0), Ball::closed(e2(3.0, 0.0), 1.0)]);
        assert_eq!(greedy_disconnected_subfamily(&apart).unwrap(), apart);
    }

    #[test]
    fn greedy_subfamily_rejects_unequal_radii() {
        let s = Space::Euclidean { dim: 2 };
        let fam = BallFamily::new(s, vec![Ball::closed(e2(0.0, 0.0), 1.0), Ball::closed(e2(3.0, 0.0), 2.0)]);
        assert!(matches!(
            greedy_disconnected_subfamily(&fam),
            Err(GeometryError::UnequalRadii(_, _))
        ));
    }

    #[test]
    fn de_groot_examples() {
        let s = Space::Euclidean { dim: 1 };
        let w = de_groot_violation(&s, &Point::euclidean([0.0]), 1.0, &[Point::euclidean([-1.0]), Point::euclidean([1.0])])
            .unwrap()
            .unwrap();
        assert_eq!(w.indices, vec![0, 1]);
        assert_eq!(w.delta(), 1);
        assert!(w.exhaustive);

        let same = vec![Point::euclidean([0.3]); 4];
        assert!(de_groot_violation(&s, &Point::euclidean([0.0]), 1.0, &same).unwrap().is_none());

        let nb = Space::NestedBall(NestedBallSpace::default());
        let cands: Vec<_> = (1..=5).map(Point::nested).collect();
        assert!(de_groot_violation(&nb, &Point::nested(0), 0.5, &cands).unwrap().is_none());
    }

    #[test]
    fn de_groot_rejects_outside_candidates() {
        let s = Space::Euclidean { dim: 1 };
        let err = de_groot_violation(&s, &Point::euclidean([0.0]), 1.0, &[Point::euclidean([1.5])]).unwrap_err();
        assert!(matches!(err, GeometryError::OutsideBall { index: 0, .. }));
    }

    #[test]
    fn de_groot_unit_circle_hexagon() {
        // centre plus a regular hexagon of circumradius 0.99: neighbouring
        // vertices are 0.99 apart, so the best separated set takes every
        // other vertex
        let s = Space::Euclidean { dim: 2 };
        let mut cands = vec![e2(0.0, 0.0)];
        for k in 0..6 {
            let a = k as f64 * PI / 3.0;
            cands.push(e2(0.99 * a.cos(), 0.99 * a.sin()));
        }
        let w = de_groot_violation(&s, &e2(0.0, 0.0), 1.0, &cands).unwrap().unwrap();
        assert_eq!(w.points.len(), 3);
    }

    #[test]
    fn de_groot_greedy_beyond_cutoff() {
        let s = Space::Euclidean { dim: 1 };
        let cands: Vec<_> = (0..25).map(|i| Point::euclidean([-1.0 + 2.0 * i as f64 / 24.0])).collect();
        let w = de_groot_violation(&s, &Point::euclidean([0.0]), 1.0, &cands).unwrap().unwrap();
        assert!(!w.exhaustive);
        assert_eq!(w.points.len(), 2);
    }
}
