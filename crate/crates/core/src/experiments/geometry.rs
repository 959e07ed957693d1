//! The disconnected Heisenberg ball family as a table, one row per ball.

use serde::{Deserialize, Serialize};

use super::{finish, ExperimentError, ExperimentResult, Table};
use crate::balls::ball_contains;
use crate::koranyi::koranyi_reimann_family;
use crate::metric::{heis_norm, HeisPoint, Point};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KoranyiConfig {
    pub n: usize,
    pub shrink: f64,
}

impl Default for KoranyiConfig {
    fn default() -> Self {
        KoranyiConfig { n: 20, shrink: 0.5 }
    }
}

pub fn koranyi_run(cfg: &KoranyiConfig, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    let (family, report) = koranyi_reimann_family(cfg.n, cfg.shrink).map_err(|e| match e {
        crate::balls::GeometryError::EmptyFamily | crate::balls::GeometryError::BadShrink(_) => {
            ExperimentError::Config(e.to_string())
        }
        other => other.into(),
    })?;
    let mut table = Table::new(&[
        "j",
        "psi",
        "theta",
        "x",
        "y",
        "z",
        "radius",
        "gauge_error",
        "shrink_steps",
        "angular_term",
        "contains_identity",
        "other_centres_inside",
    ]);
    let mut violations = Vec::new();
    let identity = Point::Heis(HeisPoint::IDENTITY);
    for (idx, (b, ball)) in report.balls.iter().zip(&family.balls).enumerate() {
        let gauge_error = (heis_norm(b.center) - b.radius).abs() / b.radius;
        if gauge_error > 1e-12 {
            violations.push(format!("ball {}: centre gauge differs from the radius by {gauge_error}", b.j));
        }
        if b.angular_term.is_some_and(|a| a >= 0.0) {
            violations.push(format!("ball {}: angular term is not negative", b.j));
        }
        let inside = report
            .containment
            .iter()
            .enumerate()
            .filter(|(i, row)| *i != idx && row[idx])
            .count();
        table.push(vec![
            b.j.into(),
            b.psi.into(),
            b.theta.into(),
            b.center.x.into(),
            b.center.y.into(),
            b.center.z.into(),
            b.radius.into(),
            gauge_error.into(),
            b.shrink_steps.into(),
            b.angular_term.unwrap_or(f64::NAN).into(),
            ball_contains(&family.space, ball, &identity)?.into(),
            inside.into(),
        ]);
    }
    if !report.disconnected {
        violations.push("the family is not disconnected".into());
    }
    if report.multiplicity_at_identity != cfg.n {
        violations.push(format!(
            "multiplicity at the identity is {}, expected {}",
            report.multiplicity_at_identity, cfg.n
        ));
    }
    let summary = serde_json::json!({
        "disconnected": report.disconnected,
        "multiplicity_at_identity": report.multiplicity_at_identity,
    });
    finish("koranyi", seed, cfg, table, violations, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_family_is_clean() {
        let r = koranyi_run(&KoranyiConfig::default(), 0).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert_eq!(r.table.rows.len(), 20);
        assert!(r.table.flags("contains_identity").unwrap().iter().all(|&c| c));
        assert!(r.table.column("other_centres_inside").unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn bad_shrink_is_a_config_error() {
        let e = koranyi_run(&KoranyiConfig { n: 3, shrink: 2.0 }, 0).unwrap_err();
        assert!(e.is_config());
    }
}
