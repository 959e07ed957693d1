//! The tie-breaking counterexample: a Dirac measure with constant
//! `η = p`, uniform-random tie-breaking and `k = ⌈ln i⌉` at certified
//! checkpoints `n_i`.
//!
//! All sample points coincide, so the neighbours at `n_i` are the `k_i`
//! points with the smallest tie-break values `Z_j`. The checkpoints grow
//! far beyond anything that can be drawn point by point; instead each
//! block `(n_{i-1}, n_i]` contributes its `K` smallest values, generated
//! in log space from exponential spacings. Block members are identified
//! by `(block, rank)`, and the `k_i` smallest values up to `n_i` are
//! always among the members of blocks `≤ i`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{ln_one_minus_exp_neg, CounterexampleSchedule};
use super::{finish, ExperimentError, ExperimentResult, Table};
use crate::rng::labeled_stream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop12Config {
    pub p: f64,
    /// Last checkpoint index reported.
    pub horizon: usize,
    pub trials: usize,
    /// `δ_i = delta_base^i`.
    pub delta_base: f64,
    pub eps_start: f64,
}

impl Default for Prop12Config {
    fn default() -> Self {
        Prop12Config {
            p: (-1.0f64).exp(),
            horizon: 30,
            trials: 10_000,
            delta_base: 0.5,
            eps_start: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Member {
    ln_u: f64,
    id: (usize, usize),
    label: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    band: u64,
    wrong: u64,
    predict_wrong: u64,
    band_wrong: u64,
    qualifying: u64,
    disjoint: u64,
}

impl Counts {
    fn add(mut self, o: &Counts) -> Counts {
        self.band += o.band;
        self.wrong += o.wrong;
        self.predict_wrong += o.predict_wrong;
        self.band_wrong += o.band_wrong;
        self.qualifying += o.qualifying;
        self.disjoint += o.disjoint;
        self
    }
}

/// `ln(n_i - n_{i-1})`.
fn ln_block_size(ln_prev: f64, ln_n: f64) -> f64 {
    if ln_prev == f64::NEG_INFINITY {
        ln_n
    } else {
        ln_n + (-(ln_prev - ln_n).exp()).ln_1p()
    }
}

/// Logs of the `count` smallest of `e^{ln_m}` uniforms, increasing.
fn smallest_uniforms<R: Rng + ?Sized>(rng: &mut R, ln_m: f64, count: usize) -> Vec<f64> {
    // W_(l) = Σ_{j≤l} E_j / (m - j + 1) are the exponential order
    // statistics and U = 1 - e^{-W}; `s` carries m·W_(l)
    let mut s = 0.0;
    (1..=count)
        .map(|l| {
            let e: f64 = rng.sample(Exp1);
            let frac = if l == 1 { 0.0 } else { (((l - 1) as f64).ln() - ln_m).exp() };
            s += e / (1.0 - frac);
            ln_one_minus_exp_neg(s.ln() - ln_m)
        })
        .collect()
}

fn simulate_path(
    schedule: &CounterexampleSchedule,
    p: f64,
    kmax: usize,
    seed: u64,
    trial: u64,
) -> Vec<Counts> {
    let mut rng = labeled_stream(seed, "prop12", trial);
    let wrong_label = p < 0.5;
    let cps = &schedule.checkpoints;
    let mut members: Vec<Member> = Vec::with_capacity(kmax * cps.len());
    let mut out = vec![Counts::default(); cps.len()];
    let mut prev: Option<(bool, Vec<(usize, usize)>)> = None;
    let mut ln_prev = f64::NEG_INFINITY;
    for (c, cp) in cps.iter().enumerate() {
        let ln_m = ln_block_size(ln_prev, cp.ln_n);
        let count = if ln_m < 20.0 { kmax.min(ln_m.exp().round() as usize) } else { kmax };
        for (rank, ln_u) in smallest_uniforms(&mut rng, ln_m, count).into_iter().enumerate() {
            members.push(Member {
                ln_u,
                id: (c, rank),
                label: rng.random::<f64>() < p,
            });
        }
        members.sort_by(|a, b| a.ln_u.total_cmp(&b.ln_u));
        ln_prev = cp.ln_n;

        let k = cp.k;
        let selected = &members[..k.min(members.len())];
        let cond1 = members.iter().filter(|m| m.ln_u < cp.ln_eps).count() >= k;
        let cond2 = members.first().is_none_or(|m| m.ln_u >= cp.ln_eps_next);
        let band = cond1 && cond2;
        let wrong = selected.len() == k && selected.iter().all(|m| m.label == wrong_label);
        let ones = selected.iter().filter(|m| m.label).count();
        let prediction = 2 * ones >= k;
        let row = &mut out[c];
        row.band = band as u64;
        row.wrong = wrong as u64;
        row.predict_wrong = (prediction != (p > 0.5)) as u64;
        row.band_wrong = (band && wrong) as u64;
        let ids: Vec<(usize, usize)> = selected.iter().map(|m| m.id).collect();
        if let Some((prev_band, prev_ids)) = &prev {
            if *prev_band && cond1 {
                out[c - 1].qualifying = 1;
                out[c - 1].disjoint = prev_ids.iter().all(|id| !ids.contains(id)) as u64;
            }
        }
        prev = Some((band, ids));
    }
    out
}

pub fn prop12_counterexample(cfg: &Prop12Config, seed: u64) -> Result<ExperimentResult, ExperimentError> {
    if !(cfg.p > 0.0 && cfg.p < 1.0) || cfg.p == 0.5 {
        return Err(ExperimentError::Config(format!("p must lie in (0,1) and differ from 1/2, got {}", cfg.p)));
    }
    if cfg.trials == 0 {
        return Err(ExperimentError::Config("trials must be at least 1".into()));
    }
    // one checkpoint past the horizon for the last disjointness check
    let schedule = CounterexampleSchedule::build(cfg.delta_base, cfg.eps_start, cfg.horizon + 1)?;
    let kmax = schedule.checkpoints.iter().map(|c| c.k).max().unwrap_or(1);
    let totals = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| simulate_path(&schedule, cfg.p, kmax, seed, t))
        .reduce(
            || vec![Counts::default(); schedule.checkpoints.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.add(y)).collect(),
        );

    let q = cfg.p.min(1.0 - cfg.p);
    let trials = cfg.trials as f64;
    let mut table = Table::new(&[
        "i",
        "k",
        "ln_n",
        "ln_eps",
        "ln_eps_next",
        "delta",
        "fail_bound",
        "band_freq",
        "qualifying",
        "disjoint",
        "wrong_freq",
        "wrong_expected",
        "wrong_z",
        "within_3sigma",
        "predict_wrong_freq",
        "band_wrong_freq",
        "partial_sum",
        "certified_partial_sum",
        "harmonic_bound",
    ]);
    let mut violations = Vec::new();
    let (mut partial, mut certified, mut harmonic) = (0.0, 0.0, 0.0);
    for (cp, c) in schedule.checkpoints.iter().zip(&totals) {
        if cp.i > cfg.horizon {
            break;
        }
        let expected = q.powi(cp.k as i32);
        let sigma = (expected * (1.0 - expected) / trials).sqrt();
        let freq = c.wrong as f64 / trials;
        let z = (freq - expected) / sigma;
        let within = z.abs() <= 3.0;
        if !within {
            violations.push(format!("checkpoint {}: wrong-vote frequency {freq} is {z:.2} sigma from {expected}", cp.i));
        }
        if c.disjoint != c.qualifying {
            violations.push(format!(
                "checkpoint {}: neighbour sets overlap on {} of {} qualifying paths",
                cp.i,
                c.qualifying - c.disjoint,
                c.qualifying
            ));
        }
        let band = c.band as f64 / trials;
        let fail = cp.fail_count + cp.fail_early;
        if band < 1.0 - fail - 3.0 * (fail * (1.0 - fail) / trials).sqrt() - 1e-12 {
            violations.push(format!("checkpoint {}: band frequency {band} below the certified 1 - {fail}", cp.i));
        }
        partial += expected;
        certified += (1.0 - cp.delta) * expected;
        harmonic += 1.0 / cp.i as f64;
        let harmonic_bound = (-1.0f64).exp() * harmonic;
        table.push(vec![
            cp.i.into(),
            cp.k.into(),
            cp.ln_n.into(),
            cp.ln_eps.into(),
            cp.ln_eps_next.into(),
            cp.delta.into(),
            fail.into(),
            band.into(),
            c.qualifying.into(),
            c.disjoint.into(),
            freq.into(),
            expected.into(),
            z.into(),
            within.into(),
            (c.predict_wrong as f64 / trials).into(),
            (c.band_wrong as f64 / trials).into(),
            partial.into(),
            certified.into(),
            harmonic_bound.into(),
        ]);
    }
    let bound = (-1.0f64).exp() * harmonic;
    if (cfg.p - (-1.0f64).exp()).abs() < 1e-6 && certified < bound {
        violations.push(format!("certified partial sum {certified} below {bound}"));
    }
    let summary = serde_json::json!({
        "checkpoints": table.rows.len(),
        "certified_partial_sum": certified,
        "harmonic_bound": bound,
    });
    finish("prop12", seed, cfg, table, violations, summary)
}
