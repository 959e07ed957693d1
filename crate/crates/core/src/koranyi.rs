//! Disconnected families of closed balls around the identity of the
//! Heisenberg group, all containing the identity.
//!
//! The centres are dilates of unit-sphere points `(e^{iθ_j} √sin ψ_j, cos ψ_j)`
//! and the radius of each ball is the gauge of its centre, held exactly.
//! Radii are found by geometric shrinking until the new centre leaves every
//! ball already chosen; the containment test is exact.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::balls::{ball_contains, Ball, BallFamily, GeometryError};
use crate::metric::{heis_norm, HeisPoint, Point, Space};

/// Shrink steps allowed per ball before giving up.
pub const KORANYI_MAX_SHRINK: usize = 200;

pub fn koranyi_psi(j: usize) -> f64 {
    let k = (j + 1) as f64;
    PI - FRAC_PI_2 / (k * k)
}

pub fn koranyi_theta(j: usize) -> f64 {
    FRAC_PI_2 * (j as f64 - 1.0) / j as f64
}

/// Unit-sphere point for index `j ≥ 1`.
pub fn koranyi_direction(j: usize) -> HeisPoint {
    let (psi, theta) = (koranyi_psi(j), koranyi_theta(j));
    let m = psi.sin().sqrt();
    HeisPoint {
        x: m * theta.cos(),
        y: m * theta.sin(),
        z: psi.cos(),
    }
}

/// `Im(e^{iψ_j} z_{j+1} z̄_j)`; negative for every `j`.
pub fn angular_term(j: usize) -> f64 {
    let (a, b) = (koranyi_psi(j), koranyi_psi(j + 1));
    (a.sin() * b.sin()).sqrt() * (a + koranyi_theta(j + 1) - koranyi_theta(j)).sin()
}

#[derive(Debug, Clone, Serialize)]
pub struct KoranyiBall {
    pub j: usize,
    pub psi: f64,
    pub theta: f64,
    pub center: HeisPoint,
    pub radius: f64,
    pub shrink_steps: usize,
    /// `Im(e^{iψ_j} z_{j+1} z̄_j)`; `None` for the last ball.
    pub angular_term: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KoranyiReport {
    pub n: usize,
    pub shrink_factor: f64,
    pub balls: Vec<KoranyiBall>,
    /// `containment[i][k]`: ball `k` contains the centre of ball `i`.
    pub containment: Vec<Vec<bool>>,
    pub disconnected: bool,
    pub multiplicity_at_identity: usize,
}

pub fn koranyi_reimann_family(n: usize, shrink_factor: f64) -> Result<(BallFamily, KoranyiReport), GeometryError> {
    if n == 0 {
        return Err(GeometryError::EmptyFamily);
    }
    if !(shrink_factor > 0.0 && shrink_factor < 1.0) {
        return Err(GeometryError::BadShrink(shrink_factor));
    }
    let mut family = BallFamily::new(Space::Heisenberg, Vec::with_capacity(n));
    let mut rows = Vec::with_capacity(n);
    let mut r = 1.0 / shrink_factor;
    for j in 1..=n {
        let dir = koranyi_direction(j);
        let mut steps = 0;
        let center = loop {
            r *= shrink_factor;
            steps += 1;
            let p = HeisPoint {
                x: r * dir.x,
                y: r * dir.y,
                z: r * r * dir.z,
            };
            if p.z.abs() < f64::MIN_POSITIVE || p.x.abs() < f64::MIN_POSITIVE {
                return Err(GeometryError::Underflow { j });
            }
            let mut outside = true;
            for b in &family.balls {
                if ball_contains(&family.space, b, &Point::Heis(p))? {
                    outside = false;
                    break;
                }
            }
            if outside {
                break p;
            }
            if steps >= KORANYI_MAX_SHRINK {
                return Err(GeometryError::ShrinkLoop { j, iterations: steps });
            }
        };
        family.push(Ball::closed_with_gauge_radius(center, center));
        rows.push(KoranyiBall {
            j,
            psi: koranyi_psi(j),
            theta: koranyi_theta(j),
            center,
            radius: heis_norm(center),
            shrink_steps: steps,
            angular_term: (j < n).then(|| angular_term(j)),
        });
    }
    let containment = family.containment_matrix()?;
    let disconnected = containment
        .iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(k, &c)| i == k || !c));
    let multiplicity_at_identity = crate::balls::multiplicity_at(&family, &Point::Heis(HeisPoint::IDENTITY))?;
    let report = KoranyiReport {
        n,
        shrink_factor,
        balls: rows,
        containment,
        disconnected,
        multiplicity_at_identity,
    };
    Ok((family, report))
}
