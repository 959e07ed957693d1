use rand::Rng;
use serde::Serialize;

use super::{AlphaBall, MeasureError};
use crate::metric::{Point, Space};

/// Finitely many atoms with positive masses summing to one.
#[derive(Debug, Clone, Serialize)]
pub struct AtomModel {
    pub space: Space,
    pub atoms: Vec<(Point, f64)>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl AtomModel {
    /// Masses are renormalised; their sum must be within `1e-9` of one.
    pub fn new(space: Space, atoms: Vec<(Point, f64)>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::BadModel("atom list is empty".into()));
        }
        for (p, m) in &atoms {
            if !space.accepts(p) {
                return Err(MeasureError::PointOutsideModel(p.render()));
            }
            if !(*m > 0.0) || !m.is_finite() {
                return Err(MeasureError::BadModel(format!("atom mass must be positive, got {m}")));
            }
        }
        let total: f64 = atoms.iter().map(|(_, m)| m).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MeasureError::BadModel(format!("atom masses sum to {total}, not 1")));
        }
        let atoms: Vec<(Point, f64)> = atoms.into_iter().map(|(p, m)| (p, m / total)).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = atoms
            .iter()
            .map(|(_, m)| {
                acc += m;
                acc
            })
            .collect();
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Ok(AtomModel {
            space,
            atoms,
            cumulative,
        })
    }

    /// Point mass at `x` in the Euclidean space of matching dimension.
    pub fn dirac(x: Point) -> Self {
        let space = match &x {
            Point::Euclidean { coords } => Space::Euclidean { dim: coords.len() },
            Point::Seq { .. } => Space::UltrametricSeq,
            Point::Nested { .. } => Space::NestedBall(Default::default()),
            Point::Heis(_) => Space::Heisenberg,
        };
        AtomModel::new(space, vec![(x, 1.0)]).expect("a single unit atom is valid")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.atoms[i].0.clone()
    }

    /// Distinct distances from `x` in increasing order, each with the mass
    /// of the closed ball of that radius.
    pub fn profile(&self, x: &Point) -> Result<Vec<(f64, f64)>, MeasureError> {
        let mut by_dist: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|(p, m)| Ok((self.space.distance(x, p)?, *m)))
            .collect::<Result<_, MeasureError>>()?;
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for (d, m) in by_dist {
            acc += m;
            match out.last_mut() {
                Some(last) if last.0 == d => last.1 = acc,
                _ => out.push((d, acc)),
            }
        }
        if let Some(last) = out.last_mut() {
            last.1 = 1.0;
        }
        Ok(out)
    }

    pub fn ball_measure(&self, x: &Point, r: f64, closed: bool) -> Result<f64, MeasureError> {
        let mut total = 0.0;
        for (p, m) in &self.atoms {
            let d = self.space.distance(x, p)?;
            if d < r || (closed && d == r) {
                total += m;
            }
        }
        Ok(total.min(1.0))
    }

    pub fn alpha_ball(&self, x: &Point, alpha: f64) -> Result<AlphaBall, MeasureError> {
        let profile = self.profile(x)?;
        Ok(alpha_ball_from_profile(&profile, alpha))
    }
}

/// `r_α` from a distance profile: the smallest listed distance whose closed
/// ball reaches mass `α`. The open ball there holds the previous entry's mass.
pub(crate) fn alpha_ball_from_profile(profile: &[(f64, f64)], alpha: f64) -> AlphaBall {
    let idx = profile
        .iter()
        .position(|&(_, c)| c >= alpha)
        .unwrap_or(profile.len() - 1);
    let (radius, closed_mass) = profile[idx];
    let open_mass = if idx == 0 { 0.0 } else { profile[idx - 1].1 };
    AlphaBall {
        radius,
        open_mass,
        closed_mass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_model() -> AtomModel {
        // atoms at 0, 1, -1, 2 in R with masses .1 .2 .3 .4
        AtomModel::new(
            Space::Euclidean { dim: 1 },
            vec![
                (Point::euclidean([0.0]), 0.1),
                (Point::euclidean([1.0]), 0.2),
                (Point::euclidean([-1.0]), 0.3),
                (Point::euclidean([2.0]), 0.4),
            ],
        )
        .unwrap()
    }

    #[test]
    fn profile_groups_ties() {
        let m = line_model();
        let p = m.profile(&Point::euclidean([0.0])).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], (0.0, 0.1));
        assert_eq!(p[1].0, 1.0);
        assert!((p[1].1 - 0.6).abs() < 1e-15);
        assert_eq!(p[2], (2.0, 1.0));
    }

    #[test]
    fn alpha_ball_on_atoms() {
        let m = line_model();
        let x = Point::euclidean([0.0]);
        // the atom itself suffices
        assert_eq!(m.alpha_ball(&x, 0.1).unwrap().radius, 0.0);
        let ab = m.alpha_ball(&x, 0.3).unwrap();
        assert_eq!(ab.radius, 1.0);
        assert!((ab.open_mass - 0.1).abs() < 1e-15);
        assert!((ab.closed_mass - 0.6).abs() < 1e-15);
        assert_eq!(m.alpha_ball(&x, 1.0).unwrap().radius, 2.0);
        // off-atom query
        let ab = m.alpha_ball(&Point::euclidean([0.5]), 0.05).unwrap();
        assert_eq!(ab.radius, 0.5);
        assert_eq!(ab.open_mass, 0.0);
    }

    #[test]
    fn unit_atom_has_zero_radius() {
        let m = AtomModel::dirac(Point::euclidean([0.2, 0.2]));
        for alpha in [0.01, 0.3, 1.0] {
            let ab = m.alpha_ball(&Point::euclidean([0.2, 0.2]), alpha).unwrap();
            assert_eq!(ab.radius, 0.0);
            assert_eq!((ab.open_mass, ab.closed_mass), (0.0, 1.0));
        }
    }

    #[test]
    fn rejects_bad_masses() {
        let s = Space::Euclidean { dim: 1 };
        assert!(AtomModel::new(s, vec![]).is_err());
        assert!(AtomModel::new(s, vec![(Point::euclidean([0.0]), 0.5)]).is_err());
        assert!(AtomModel::new(s, vec![(Point::euclidean([0.0]), -1.0), (Point::euclidean([1.0]), 2.0)]).is_err());
    }
}
