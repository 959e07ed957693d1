//! The k-NN rule with explicit tie-breaking, and the estimators `η_n`,
//! `η*_n` of the regression function.
//!
//! Neighbour search is brute force over the sample. Distances are compared
//! through [`Space::distance_key`], so ties are exact wherever the metric
//! takes exact values.

use std::cmp::Ordering;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{b_alpha_from, b_alpha_half, AlphaBall, LearningProblem, MeasureError, ProbabilityModel};
use crate::metric::{nested_rank_key, MetricError, Point, Space};

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("tie-break value {0} outside [0, 1]")]
    BadOffset(f64),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("unknown tie-break policy `{0}` (expected by-index, uniform-random or dgkl)")]
    UnknownPolicy(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Point,
    pub y: u8,
    /// Tie-breaking value in `[0, 1]`.
    pub z: f64,
}

/// A labelled sample. Positions matter: duplicates are distinct members.
#[derive(Debug, Clone, Serialize)]
pub struct LabeledSample {
    pub space: Space,
    pub points: Vec<LabeledPoint>,
}

impl LabeledSample {
    pub fn new(space: Space, points: Vec<LabeledPoint>) -> Result<Self, KnnError> {
        for p in &points {
            check_point(&space, p)?;
        }
        Ok(LabeledSample { space, points })
    }

    pub fn empty(space: Space) -> Self {
        LabeledSample {
            space,
            points: Vec::new(),
        }
    }

    /// `n` labelled draws from `problem`, each with a uniform tie-break value.
    pub fn draw<R: Rng + ?Sized>(problem: &LearningProblem, n: usize, rng: &mut R) -> Self {
        let mut s = LabeledSample::empty(problem.model.space());
        for _ in 0..n {
            s.push_draw(problem, rng);
        }
        s
    }

    pub fn push_draw<R: Rng + ?Sized>(&mut self, problem: &LearningProblem, rng: &mut R) {
        let (x, y) = problem.draw(rng);
        let z = rng.random::<f64>();
        self.points.push(LabeledPoint { x, y, z });
    }

    pub fn push(&mut self, p: LabeledPoint) -> Result<(), KnnError> {
        check_point(&self.space, &p)?;
        self.points.push(p);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One row per point: the coordinates (or symbols / index), `y`, `z`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), KnnError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z"]).map_err(csv_io)?;
        for p in &self.points {
            w.write_record([p.x.render(), p.y.to_string(), format!("{:.16e}", p.z)])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn check_point(space: &Space, p: &LabeledPoint) -> Result<(), KnnError> {
    if p.y > 1 {
        return Err(KnnError::BadLabel(p.y));
    }
    if !(0.0..=1.0).contains(&p.z) {
        return Err(KnnError::BadOffset(p.z));
    }
    if !space.accepts(&p.x) {
        return Err(MetricError::Mismatch {
            space: space.name(),
            point: p.x.variant_name(),
        }
        .into());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakPolicy {
    /// Ascending sample index.
    ByIndex,
    /// Ascending `z_i`: a uniformly random choice among tied points.
    UniformRandom,
    /// Ascending `|z_i - z|` for the query's own `z`, then index.
    Dgkl,
}

impl TieBreakPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            TieBreakPolicy::ByIndex => "by-index",
            TieBreakPolicy::UniformRandom => "uniform-random",
            TieBreakPolicy::Dgkl => "dgkl",
        }
    }
}

impl FromStr for TieBreakPolicy {
    type Err = KnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "by-index" => Ok(TieBreakPolicy::ByIndex),
            "uniform-random" => Ok(TieBreakPolicy::UniformRandom),
            "dgkl" => Ok(TieBreakPolicy::Dgkl),
            other => Err(KnnError::UnknownPolicy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborSet {
    /// Strictly closer points in index order, then the chosen tied points in
    /// selection order.
    pub indices: Vec<usize>,
    /// `r_knn(x)`; zero when the nested-ball radius underflows.
    pub radius: f64,
    /// Distance key of `radius` (see [`Space::distance_key`]).
    pub radius_key: f64,
    /// Number of sample points at exactly `radius`.
    pub tied: usize,
}

fn check_k(sample: &LabeledSample, k: usize) -> Result<(), KnnError> {
    if k == 0 || k > sample.len() {
        return Err(KnnError::KOutOfRange { k, n: sample.len() });
    }
    Ok(())
}

fn keys(sample: &LabeledSample, x: &Point) -> Result<Vec<f64>, KnnError> {
    sample
        .points
        .iter()
        .map(|p| sample.space.distance_key(x, &p.x).map_err(KnnError::from))
        .collect()
}

fn kth_smallest(keys: &[f64], k: usize) -> f64 {
    let mut sorted = keys.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// `min{r ≥ 0 : #{i : x_i ∈ B̄(x, r)} ≥ k}`, the k-th smallest distance.
pub fn r_knn(sample: &LabeledSample, x: &Point, k: usize) -> Result<f64, KnnError> {
    check_k(sample, k)?;
    let key = kth_smallest(&keys(sample, x)?, k);
    Ok(sample.space.key_to_distance(key))
}

pub fn select_neighbors(
    sample: &LabeledSample,
    x: &Point,
    k: usize,
    policy: TieBreakPolicy,
    query_z: f64,
) -> Result<NeighborSet, KnnError> {
    check_k(sample, k)?;
    if !(0.0..=1.0).contains(&query_z) {
        return Err(KnnError::BadOffset(query_z));
    }
    let keys = keys(sample, x)?;
    let rk = kth_smallest(&keys, k);
    let mut indices: Vec<usize> = (0..keys.len()).filter(|&i| keys[i] < rk).collect();
    let mut ties: Vec<usize> = (0..keys.len()).filter(|&i| keys[i] == rk).collect();
    let tied = ties.len();
    let z = |i: usize| sample.points[i].z;
    match policy {
        TieBreakPolicy::ByIndex => {}
        TieBreakPolicy::UniformRandom => ties.sort_by(|&a, &b| z(a).total_cmp(&z(b)).then(a.cmp(&b))),
        TieBreakPolicy::Dgkl => ties.sort_by(|&a, &b| {
            (z(a) - query_z)
                .abs()
                .total_cmp(&(z(b) - query_z).abs())
                .then(a.cmp(&b))
        }),
    }
    let need = k - indices.len();
    indices.extend_from_slice(&ties[..need]);
    Ok(NeighborSet {
        indices,
        radius: sample.space.key_to_distance(rk),
        radius_key: rk,
        tied,
    })
}

/// Mean label over the selected neighbours.
pub fn eta_n(
    sample: &LabeledSample,
    x: &Point,
    k: usize,
    policy: TieBreakPolicy,
    query_z: f64,
) -> Result<f64, KnnError> {
    let nb = select_neighbors(sample, x, k, policy, query_z)?;
    let ones: usize = nb.indices.iter().map(|&i| sample.points[i].y as usize).sum();
    Ok(ones as f64 / k as f64)
}

/// Majority vote; a split vote goes to label 1.
pub fn predict(
    sample: &LabeledSample,
    x: &Point,
    k: usize,
    policy: TieBreakPolicy,
    query_z: f64,
) -> Result<u8, KnnError> {
    let nb = select_neighbors(sample, x, k, policy, query_z)?;
    let ones: usize = nb.indices.iter().map(|&i| sample.points[i].y as usize).sum();
    Ok(u8::from(2 * ones >= k))
}

/// `r_α(x)` as a distance key, with the ball masses there.
pub fn alpha_ball_key(model: &ProbabilityModel, x: &Point, alpha: f64) -> Result<(f64, AlphaBall), KnnError> {
    if let (ProbabilityModel::Nested(m), Point::Nested { index }) = (model, x) {
        let na = m.nested_alpha(*index, alpha);
        let key = nested_rank_key(na.rank);
        let ab = AlphaBall {
            radius: model.space().key_to_distance(key),
            open_mass: na.open_mass,
            closed_mass: na.closed_mass,
        };
        return Ok((key, ab));
    }
    let ab = model.alpha_ball(x, alpha)?;
    Ok((ab.radius, ab))
}

fn alpha_of(sample: &LabeledSample, k: usize) -> Result<f64, KnnError> {
    check_k(sample, k)?;
    Ok(k as f64 / sample.len() as f64)
}

/// `(1/k) Σ I{d(X_i, x) < r_{k/n}(x)} Y_i`. Not clamped to `[0, 1]`.
pub fn eta_star_n(sample: &LabeledSample, model: &ProbabilityModel, x: &Point, k: usize) -> Result<f64, KnnError> {
    let alpha = alpha_of(sample, k)?;
    let (rk, _) = alpha_ball_key(model, x, alpha)?;
    let mut ones = 0usize;
    for p in &sample.points {
        if p.y == 1 && sample.space.distance_key(x, &p.x)? < rk {
            ones += 1;
        }
    }
    Ok(ones as f64 / k as f64)
}

/// `(1/k) Σ I{d(X_i, x) < r_{k/n}(x)}`, the same count without labels.
pub fn inner_ball_fraction(
    sample: &LabeledSample,
    model: &ProbabilityModel,
    x: &Point,
    k: usize,
) -> Result<f64, KnnError> {
    let alpha = alpha_of(sample, k)?;
    let (rk, _) = alpha_ball_key(model, x, alpha)?;
    let mut count = 0usize;
    for p in &sample.points {
        if sample.space.distance_key(x, &p.x)? < rk {
            count += 1;
        }
    }
    Ok(count as f64 / k as f64)
}

/// Extended-domain version: sample points on the sphere of radius
/// `r_{k/n}(x)` count when `|z_i - z| ≤ b_{k/n}(x, z)`.
pub fn eta_star_extended(
    sample: &LabeledSample,
    model: &ProbabilityModel,
    x: &Point,
    z: f64,
    k: usize,
) -> Result<f64, KnnError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(KnnError::BadOffset(z));
    }
    let alpha = alpha_of(sample, k)?;
    let (rk, ab) = alpha_ball_key(model, x, alpha)?;
    let b = b_alpha_from(b_alpha_half(alpha, &ab), z);
    let mut ones = 0usize;
    for p in &sample.points {
        if p.y == 0 {
            continue;
        }
        let inside = match sample.space.distance_key(x, &p.x)?.total_cmp(&rk) {
            Ordering::Less => true,
            Ordering::Equal => (p.z - z).abs() <= b,
            Ordering::Greater => false,
        };
        if inside {
            ones += 1;
        }
    }
    Ok(ones as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomModel, NestedBallModel, UniformCube};

    fn line(xs: &[f64], ys: &[u8], zs: &[f64]) -> LabeledSample {
        let pts = xs
            .iter()
            .zip(ys)
            .zip(zs)
            .map(|((&x, &y), &z)| LabeledPoint {
                x: Point::euclidean([x]),
                y,
                z,
            })
            .collect();
        LabeledSample::new(Space::Euclidean { dim: 1 }, pts).unwrap()
    }

    #[test]
    fn r_knn_order_statistic() {
        let s = line(&[1.0, 2.0, 3.0], &[0, 0, 0], &[0.0; 3]);
        assert_eq!(r_knn(&s, &Point::euclidean([0.0]), 2).unwrap(), 2.0);
        let s = line(&[5.0; 4], &[0; 4], &[0.0; 4]);
        assert_eq!(r_knn(&s, &Point::euclidean([0.0]), 3).unwrap(), 5.0);
        assert_eq!(r_knn(&s, &Point::euclidean([5.0]), 1).unwrap(), 0.0);
        assert!(matches!(
            r_knn(&s, &Point::euclidean([0.0]), 5),
            Err(KnnError::KOutOfRange { k: 5, n: 4 })
        ));
        assert!(r_knn(&s, &Point::euclidean([0.0]), 0).is_err());
    }

    #[test]
    fn tie_policies() {
        // three points at distance 1 from the origin
        let s = line(&[1.0, -1.0, 1.0], &[0, 1, 1], &[0.9, 0.1, 0.5]);
        let o = Point::euclidean([0.0]);
        let nb = select_neighbors(&s, &o, 2, TieBreakPolicy::ByIndex, 0.0).unwrap();
        assert_eq!(nb.indices, vec![0, 1]);
        assert_eq!((nb.radius, nb.tied), (1.0, 3));
        let nb = select_neighbors(&s, &o, 2, TieBreakPolicy::UniformRandom, 0.0).unwrap();
        assert_eq!(nb.indices, vec![1, 2]);
        let nb = select_neighbors(&s, &o, 2, TieBreakPolicy::Dgkl, 0.8).unwrap();
        assert_eq!(nb.indices, vec![0, 2]);
        // equal gaps |1-0.75| = |0.5-0.75|: index decides
        let s = line(&[1.0, -1.0, 1.0], &[0, 1, 1], &[1.0, 0.0, 0.5]);
        let nb = select_neighbors(&s, &o, 1, TieBreakPolicy::Dgkl, 0.75).unwrap();
        assert_eq!(nb.indices, vec![0]);
    }

    #[test]
    fn strictly_closer_points_always_win() {
        let s = line(&[3.0, 1.0, 2.0, 2.0], &[0; 4], &[0.0, 0.9, 0.2, 0.1]);
        for policy in [TieBreakPolicy::ByIndex, TieBreakPolicy::UniformRandom, TieBreakPolicy::Dgkl] {
            let nb = select_neighbors(&s, &Point::euclidean([0.0]), 2, policy, 0.5).unwrap();
            assert_eq!(nb.indices[0], 1);
            assert_eq!(nb.indices.len(), 2);
        }
    }

    #[test]
    fn votes() {
        let o = Point::euclidean([0.0]);
        let s = line(&[1.0, 2.0, 3.0], &[1, 1, 0], &[0.0; 3]);
        assert_eq!(predict(&s, &o, 3, TieBreakPolicy::ByIndex, 0.0).unwrap(), 1);
        let s = line(&[1.0, 2.0], &[1, 0], &[0.0; 2]);
        assert_eq!(predict(&s, &o, 2, TieBreakPolicy::ByIndex, 0.0).unwrap(), 1);
        let s = line(&[1.0, 2.0, 3.0], &[0, 0, 0], &[0.0; 3]);
        assert_eq!(predict(&s, &o, 3, TieBreakPolicy::ByIndex, 0.0).unwrap(), 0);
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 0, 0], &[0.0; 4]);
        assert_eq!(eta_n(&s, &o, 4, TieBreakPolicy::ByIndex, 0.0).unwrap(), 0.5);
        let s = line(&[1.0, 2.0], &[0, 1], &[0.0; 2]);
        assert_eq!(eta_n(&s, &o, 1, TieBreakPolicy::ByIndex, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_points() {
        let bad = LabeledPoint {
            x: Point::euclidean([0.0]),
            y: 2,
            z: 0.5,
        };
        assert!(matches!(
            LabeledSample::new(Space::Euclidean { dim: 1 }, vec![bad]),
            Err(KnnError::BadLabel(2))
        ));
        let bad = LabeledPoint {
            x: Point::euclidean([0.0]),
            y: 1,
            z: 1.5,
        };
        assert!(LabeledSample::new(Space::Euclidean { dim: 1 }, vec![bad]).is_err());
        assert_eq!("dgkl".parse::<TieBreakPolicy>().unwrap(), TieBreakPolicy::Dgkl);
        assert!("random".parse::<TieBreakPolicy>().is_err());
    }

    #[test]
    fn deep_nested_points_compare_by_rank() {
        let sp = Space::NestedBall(Default::default());
        let pts = [5000u64, 3000, 7, 3000]
            .iter()
            .map(|&n| LabeledPoint {
                x: Point::nested(n),
                y: 1,
                z: 0.5,
            })
            .collect();
        let s = LabeledSample::new(sp, pts).unwrap();
        // from x_0 the deepest atom is closest
        let nb = select_neighbors(&s, &Point::nested(0), 1, TieBreakPolicy::ByIndex, 0.0).unwrap();
        assert_eq!(nb.indices, vec![0]);
        assert_eq!(nb.radius, 0.0);
        let nb = select_neighbors(&s, &Point::nested(3000), 2, TieBreakPolicy::ByIndex, 0.0).unwrap();
        assert_eq!(nb.indices, vec![1, 3]);
        assert_eq!(nb.radius_key, f64::NEG_INFINITY);
    }

    #[test]
    fn eta_star_on_uniform_interval() {
        use rand::SeedableRng;
        let model = ProbabilityModel::UniformCube(UniformCube::new(1).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<LabeledPoint> = (0..100)
            .map(|_| LabeledPoint {
                x: Point::euclidean([rng.random::<f64>()]),
                y: rng.random_range(0..2u8),
                z: rng.random(),
            })
            .collect();
        let s = LabeledSample::new(Space::Euclidean { dim: 1 }, pts.clone()).unwrap();
        let x = Point::euclidean([0.5]);
        // r_{0.1}(0.5) = 0.05: count of labelled-1 points in (0.45, 0.55)
        let direct = pts
            .iter()
            .filter(|p| p.y == 1 && (p.x.first_coord().unwrap() - 0.5).abs() < 0.05)
            .count() as f64
            / 10.0;
        let v = eta_star_n(&s, &model, &x, 10).unwrap();
        assert!((v - direct).abs() < 1e-12);
        // atomless: no sphere mass, the extended version agrees
        assert_eq!(eta_star_extended(&s, &model, &x, 0.3, 10).unwrap(), v);
    }

    #[test]
    fn eta_star_extended_on_single_atom() {
        use rand::SeedableRng;
        let at = Point::euclidean([0.0]);
        let model = ProbabilityModel::Atoms(AtomModel::dirac(at.clone()));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let pts: Vec<LabeledPoint> = (0..n)
            .map(|_| LabeledPoint {
                x: at.clone(),
                y: 1,
                z: rng.random(),
            })
            .collect();
        let s = LabeledSample::new(Space::Euclidean { dim: 1 }, pts.clone()).unwrap();
        let (k, z) = (40, 0.5);
        // whole mass on the sphere of radius 0; band half-width α/2
        let b = 0.5 * k as f64 / n as f64;
        let band = pts.iter().filter(|p| (p.z - z).abs() <= b).count() as f64 / k as f64;
        let v = eta_star_extended(&s, &model, &at, z, k).unwrap();
        assert_eq!(v, band);
        assert!((v - 1.0).abs() < 0.5);
        assert_eq!(eta_star_n(&s, &model, &at, k).unwrap(), 0.0);
    }

    #[test]
    fn eta_star_nested_deep_atoms() {
        let model = ProbabilityModel::Nested(NestedBallModel::default());
        let pts = (0..4)
            .map(|i| LabeledPoint {
                x: Point::nested(2000 + i),
                y: 1,
                z: 0.5,
            })
            .collect();
        let s = LabeledSample::new(model.space(), pts).unwrap();
        // r_{1/2}(x_0) = r_2; every deep atom is strictly inside
        assert_eq!(eta_star_n(&s, &model, &Point::nested(0), 2).unwrap(), 2.0);
    }
}
