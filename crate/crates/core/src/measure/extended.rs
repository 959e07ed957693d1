//! The extended domain `Ω × [0,1]`: the sets `B(x, z, r, b)`, the band
//! half-width `b_α`, and the sets `D(x, z, α)` of extended points whose
//! α-ball captures `(x, z)`.

use rand::Rng;
use rayon::prelude::*;

use super::nested::NestedAlpha;
use super::{AlphaBall, Estimate, MeasureError, ProbabilityModel};
use crate::metric::{NestedBallSpace, Point};

/// `λ(N(z, b) ∩ [0,1]) = min(z+b, 1) - max(z-b, 0)`.
pub fn band_length(z: f64, b: f64) -> f64 {
    ((z + b).min(1.0) - (z - b).max(0.0)).max(0.0)
}

/// `b_α(x, 1/2)` from the masses of the ball, closed ball and sphere at
/// radius `r_α(x)`.
pub fn b_alpha_half(alpha: f64, ab: &AlphaBall) -> f64 {
    let sphere = ab.sphere_mass();
    if sphere <= 0.0 {
        0.0
    } else if ab.closed_mass > alpha {
        ((alpha - ab.open_mass) / (2.0 * sphere)).clamp(0.0, 0.5)
    } else {
        0.5
    }
}

/// `b_α(x, z)` from `β = b_α(x, 1/2)`.
pub fn b_alpha_from(beta: f64, z: f64) -> f64 {
    if beta <= z && z <= 1.0 - beta {
        beta
    } else {
        2.0 * beta - z.min(1.0 - z)
    }
}

fn check_alpha_open(alpha: f64) -> Result<(), MeasureError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(MeasureError::Alpha {
            alpha,
            range: "(0, 1)",
        })
    }
}

fn check_offset(z: f64) -> Result<(), MeasureError> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(MeasureError::BandOffset(z))
    }
}

pub fn b_alpha(model: &ProbabilityModel, x: &Point, z: f64, alpha: f64) -> Result<f64, MeasureError> {
    check_alpha_open(alpha)?;
    check_offset(z)?;
    let ab = model.alpha_ball(x, alpha)?;
    Ok(b_alpha_from(b_alpha_half(alpha, &ab), z))
}

/// `(μ⊗λ)(B(x, z, r, b)) = μ(B(x,r)) + μ(S(x,r)) λ(N(z,b) ∩ [0,1])`.
pub fn extended_ball_measure(
    model: &ProbabilityModel,
    x: &Point,
    z: f64,
    r: f64,
    b: f64,
) -> Result<Estimate, MeasureError> {
    check_offset(z)?;
    if !(b >= 0.0) {
        return Err(MeasureError::BandOffset(b));
    }
    let open = model.ball_measure(x, r, false)?;
    let sphere = model.sphere_measure(x, r)?;
    Ok(Estimate {
        value: open.value + sphere.value * band_length(z, b),
        stderr: open.stderr.max(sphere.stderr),
    })
}

/// Measure of `{w ∈ [lo, hi] : |z - w| ≤ a + c w}`.
fn linear_band(lo: f64, hi: f64, z: f64, a: f64, c: f64) -> f64 {
    let (mut l, mut h) = (lo, hi);
    // z - w ≤ a + c w  ⇔  (1 + c) w ≥ z - a
    let k = 1.0 + c;
    if k > 0.0 {
        l = l.max((z - a) / k);
    } else if z - a > 0.0 {
        return 0.0;
    }
    // w - z ≤ a + c w  ⇔  (1 - c) w ≤ a + z
    let k = 1.0 - c;
    if k > 0.0 {
        h = h.min((a + z) / k);
    } else if a + z < 0.0 {
        return 0.0;
    }
    (h - l).max(0.0)
}

/// `λ{w ∈ [0,1] : |z - w| ≤ b_α(y, w)}` for a point `y` with
/// `b_α(y, 1/2) = β`.
pub fn tie_band_measure(z: f64, beta: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    let beta = beta.min(0.5);
    linear_band(0.0, beta, z, 2.0 * beta, -1.0)
        + linear_band(beta, 1.0 - beta, z, beta, 0.0)
        + linear_band(1.0 - beta, 1.0, z, 2.0 * beta - 1.0, 1.0)
}

/// Whether `(y, w) ∈ D(x, z, α)`.
pub fn in_d_set(model: &ProbabilityModel, x: &Point, z: f64, y: &Point, w: f64, alpha: f64) -> Result<bool, MeasureError> {
    let space = model.space();
    let d = space.distance(x, y)?;
    let ab = model.alpha_ball(y, alpha)?;
    Ok(if d < ab.radius {
        true
    } else if d == ab.radius {
        (z - w).abs() <= b_alpha_from(b_alpha_half(alpha, &ab), w)
    } else {
        false
    })
}

/// Nested-model membership worked out on indices, so it also covers atoms
/// whose radii underflow.
fn nested_member_measure(a: u64, n: u64, na: &NestedAlpha, alpha: f64, z: f64) -> f64 {
    let dist = NestedBallSpace::distance_rank(a, n);
    // None encodes radius zero; a larger index means a smaller radius
    let less = match (dist, na.rank) {
        (_, None) => false,
        (None, Some(_)) => true,
        (Some(d), Some(r)) => d > r,
    };
    if less {
        return 1.0;
    }
    if dist == na.rank {
        let ab = AlphaBall {
            radius: 0.0,
            open_mass: na.open_mass,
            closed_mass: na.closed_mass,
        };
        return tie_band_measure(z, b_alpha_half(alpha, &ab));
    }
    0.0
}

fn nested_d_exact(model: &super::NestedBallModel, a: u64, z: f64, alpha: f64) -> f64 {
    let big_m = super::nested::largest_index_with_mass(alpha);
    let mass = super::nested::atom_mass;
    let mut total = 0.0;
    let head = big_m + 1;
    for n in 1..=head {
        let na = model.nested_alpha(n, alpha);
        total += mass(n) * nested_member_measure(a, n, &na, alpha, z);
    }
    // n in (M+1, a]: x_n lies strictly inside its own α-ball around x_a
    if a > head {
        total += 1.0 / (head + 1) as f64 - 1.0 / (a + 1) as f64;
    }
    // n > max(M+1, a): the α-ball is B(x_n, r_M), and d(x_a, x_n) = r_a
    let start = head.max(a);
    let factor = if a == 0 || a > big_m {
        1.0
    } else if a == big_m {
        let na = model.nested_alpha(start + 1, alpha);
        nested_member_measure(a, start + 1, &na, alpha, z)
    } else {
        0.0
    };
    total + factor / (start + 1) as f64
}

/// Exact `(μ⊗λ)(D(x, z, α))` for models with atoms only (atom lists,
/// nested-ball, product measures on strings up to 2^20 support points).
pub fn d_measure_exact(model: &ProbabilityModel, x: &Point, z: f64, alpha: f64) -> Result<f64, MeasureError> {
    check_alpha_open(alpha)?;
    check_offset(z)?;
    model.check_point(x)?;
    let atoms: Vec<(Point, f64)> = match model {
        ProbabilityModel::Nested(m) => {
            let a = match x {
                Point::Nested { index } => *index,
                _ => unreachable!("checked above"),
            };
            return Ok(nested_d_exact(m, a, z, alpha));
        }
        ProbabilityModel::Atoms(m) => m.atoms.clone(),
        ProbabilityModel::SeqProduct(m) => m
            .support(1 << 20)
            .ok_or(MeasureError::QuadratureUnavailable("seq_product"))?,
        other => return Err(MeasureError::QuadratureUnavailable(other.name())),
    };
    let space = model.space();
    let mut total = 0.0;
    for (y, m) in &atoms {
        let d = space.distance(x, y)?;
        let ab = model.alpha_ball(y, alpha)?;
        let share = if d < ab.radius {
            1.0
        } else if d == ab.radius {
            tie_band_measure(z, b_alpha_half(alpha, &ab))
        } else {
            0.0
        };
        total += m * share;
    }
    Ok(total)
}

const BLOCK: usize = 4096;

/// Monte-Carlo estimate of `(μ⊗λ)(D(x, z, α))` from `samples` draws of
/// `(y, w) ~ μ⊗λ`, split into blocks with independently seeded streams.
pub fn d_measure_estimate(
    model: &ProbabilityModel,
    x: &Point,
    z: f64,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, MeasureError> {
    check_alpha_open(alpha)?;
    check_offset(z)?;
    model.check_point(x)?;
    if samples == 0 {
        return Err(MeasureError::BadModel("sample count must be positive".into()));
    }
    let blocks = samples.div_ceil(BLOCK);
    let hits: Vec<usize> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = crate::rng::stream(seed, b as u64);
            let len = BLOCK.min(samples - b * BLOCK);
            let mut hits = 0;
            for _ in 0..len {
                let y = model.sample(&mut rng);
                let w: f64 = rng.random();
                if member(model, x, z, &y, w, alpha)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_, MeasureError>>()?;
    Ok(Estimate::proportion(hits.iter().sum(), samples))
}

fn member(model: &ProbabilityModel, x: &Point, z: f64, y: &Point, w: f64, alpha: f64) -> Result<bool, MeasureError> {
    match (model, x, y) {
        (ProbabilityModel::Nested(m), Point::Nested { index: a }, Point::Nested { index: n }) => {
            let na = m.nested_alpha(*n, alpha);
            let dist = NestedBallSpace::distance_rank(*a, *n);
            let less = match (dist, na.rank) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(d), Some(r)) => d > r,
            };
            if less {
                return Ok(true);
            }
            if dist != na.rank {
                return Ok(false);
            }
            let ab = AlphaBall {
                radius: 0.0,
                open_mass: na.open_mass,
                closed_mass: na.closed_mass,
            };
            Ok((z - w).abs() <= b_alpha_from(b_alpha_half(alpha, &ab), w))
        }
        // μ(B(y, ·)) is continuous, so d(x,y) < r_α(y) iff μ(B(y, d(x,y))) < α;
        // the tie set d(x,y) = r_α(y) is null
        (m, _, _) if m.is_exact_continuous() => {
            let d = m.space().distance(x, y)?;
            Ok(m.ball_measure(y, d, false)?.value < alpha)
        }
        _ => in_d_set(model, x, z, y, w, alpha),
    }
}

/// `4α(-ln α + 1)`.
pub fn d_measure_bound(alpha: f64) -> f64 {
    4.0 * alpha * (1.0 - alpha.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomModel, NestedBallModel, SeqProductModel};

    #[test]
    fn band_length_clips() {
        assert_eq!(band_length(0.5, 0.25), 0.5);
        assert_eq!(band_length(0.1, 0.25), 0.35);
        assert_eq!(band_length(0.3, 2.0), 1.0);
        assert_eq!(band_length(0.3, 0.0), 0.0);
    }

    #[test]
    fn b_alpha_cases() {
        // unit atom, α = 0.3: (0.3 - 0) / 2
        let m = ProbabilityModel::Atoms(AtomModel::dirac(Point::euclidean([0.0])));
        let x = Point::euclidean([0.0]);
        assert!((b_alpha(&m, &x, 0.5, 0.3).unwrap() - 0.15).abs() < 1e-15);
        // near an end the band is widened to keep its length
        assert!((b_alpha(&m, &x, 0.05, 0.3).unwrap() - 0.25).abs() < 1e-15);
        // μ(B̄) = α exactly with a charged sphere
        let two = ProbabilityModel::Atoms(
            AtomModel::new(
                crate::metric::Space::Euclidean { dim: 1 },
                vec![(Point::euclidean([0.0]), 0.5), (Point::euclidean([1.0]), 0.5)],
            )
            .unwrap(),
        );
        assert_eq!(b_alpha(&two, &x, 0.5, 0.5).unwrap(), 0.5);
        // null sphere
        let cube = ProbabilityModel::UniformCube(crate::measure::UniformCube::new(1).unwrap());
        assert_eq!(b_alpha(&cube, &Point::euclidean([0.4]), 0.5, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn extended_ball_reaches_alpha() {
        let models = [
            (ProbabilityModel::Nested(NestedBallModel::default()), Point::nested(3)),
            (ProbabilityModel::SeqProduct(SeqProductModel::uniform(6, 2).unwrap()), Point::seq([0, 1, 1, 0, 0, 1])),
            (ProbabilityModel::Atoms(AtomModel::dirac(Point::euclidean([1.0, 2.0]))), Point::euclidean([1.0, 2.0])),
        ];
        for (m, x) in &models {
            for alpha in [0.01, 0.1, 0.3, 0.5, 0.77] {
                for z in [0.0, 0.1, 0.5, 0.93, 1.0] {
                    let ab = m.alpha_ball(x, alpha).unwrap();
                    let b = b_alpha(m, x, z, alpha).unwrap();
                    let v = extended_ball_measure(m, x, z, ab.radius, b).unwrap().value;
                    assert!((v - alpha).abs() < 1e-12, "{} α={alpha} z={z}: {v}", m.name());
                }
            }
        }
    }

    #[test]
    fn nested_extended_ball_example() {
        // x_n, z = 1/2, r = r_n, b = 1/4: 1/(n(n+1)) + (1/2)/(n+1)
        let m = ProbabilityModel::Nested(NestedBallModel::default());
        for n in 1..10u64 {
            let r = 0.5f64.powi(n as i32);
            let v = extended_ball_measure(&m, &Point::nested(n), 0.5, r, 0.25).unwrap().value;
            let nf = n as f64;
            assert!((v - (1.0 / (nf * (nf + 1.0)) + 0.5 / (nf + 1.0))).abs() < 1e-15);
        }
    }

    /// λ{w : |z - w| ≤ b(w)} on a fine grid.
    fn band_grid(z: f64, beta: f64) -> f64 {
        let n = 200_000;
        (0..n)
            .filter(|i| {
                let w = (*i as f64 + 0.5) / n as f64;
                (z - w).abs() <= b_alpha_from(beta, w)
            })
            .count() as f64
            / n as f64
    }

    #[test]
    fn tie_band_matches_grid() {
        for beta in [0.0, 0.05, 0.2, 0.37, 0.5] {
            for z in [0.0, 0.03, 0.2, 0.5, 0.8, 1.0] {
                let exact = tie_band_measure(z, beta);
                let grid = band_grid(z, beta);
                assert!((exact - grid).abs() < 1e-4, "β={beta} z={z}: {exact} vs {grid}");
            }
        }
    }

    #[test]
    fn nested_exact_matches_atom_enumeration() {
        // float radii for the first atoms, one representative for the tail
        let nested = ProbabilityModel::Nested(NestedBallModel::default());
        let model = NestedBallModel::default();
        for a in [0u64, 1, 2, 4, 7, 30] {
            for alpha in [0.3, 0.1, 0.04, 0.013] {
                for z in [0.0, 0.25, 0.9] {
                    let exact = d_measure_exact(&nested, &Point::nested(a), z, alpha).unwrap();
                    // direct membership sum over atoms 1..=N, plus the tail
                    let cap = 1000u64;
                    let space = nested.space();
                    let x = Point::nested(a);
                    let share = |n: u64| {
                        let y = Point::nested(n);
                        let d = space.distance(&x, &y).unwrap();
                        let ab = model.alpha_ball(&y, alpha).unwrap();
                        if d < ab.radius {
                            1.0
                        } else if d == ab.radius {
                            tie_band_measure(z, b_alpha_half(alpha, &ab))
                        } else {
                            0.0
                        }
                    };
                    let mut brute = 0.0;
                    for n in 1..=cap {
                        let nf = n as f64;
                        brute += share(n) / (nf * (nf + 1.0));
                    }
                    brute += share(cap + 1) / (cap + 1) as f64;
                    assert!((exact - brute).abs() < 1e-12, "a={a} α={alpha} z={z}: {exact} vs {brute}");
                }
            }
        }
    }

    #[test]
    fn estimate_agrees_with_exact() {
        let m = ProbabilityModel::Nested(NestedBallModel::default());
        let x = Point::nested(0);
        let exact = d_measure_exact(&m, &x, 0.0, 0.03).unwrap();
        let est = d_measure_estimate(&m, &x, 0.0, 0.03, 100_000, 5).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.stderr + 1e-9, "{exact} vs {est:?}");
        let seq = ProbabilityModel::SeqProduct(SeqProductModel::uniform(8, 2).unwrap());
        let x = Point::seq([1, 0, 1, 1, 0, 0, 1, 0]);
        let exact = d_measure_exact(&seq, &x, 0.4, 0.05).unwrap();
        let est = d_measure_estimate(&seq, &x, 0.4, 0.05, 100_000, 6).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.stderr + 1e-9, "{exact} vs {est:?}");
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let m = ProbabilityModel::UniformCube(crate::measure::UniformCube::new(2).unwrap());
        let x = Point::euclidean([0.2, 0.7]);
        let a = d_measure_estimate(&m, &x, 0.5, 0.05, 20_000, 9).unwrap();
        let b = d_measure_estimate(&m, &x, 0.5, 0.05, 20_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_value() {
        assert!((d_measure_bound(0.01) - 0.2242068074).abs() < 1e-9);
    }
}
