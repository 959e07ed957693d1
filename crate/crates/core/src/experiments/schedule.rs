//! Choices of `k` as a function of the sample size, and the checkpoint
//! schedule of the tie-breaking counterexample.
//!
//! Checkpoint sizes `n_i` grow like `2^{i²/2}`, so they and the band edges
//! `ε_i` are kept as natural logarithms. Below `2^40` the sizes are exact
//! integers; above, the logarithm is the record.

use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// `k = ⌈√n⌉`.
    Sqrt,
    /// `k = ⌈ln n⌉`, at least 1.
    Log,
    /// `k = ⌈ln i⌉` for `n_i ≤ n < n_{i+1}` (and 1 before `n_2`).
    Prop12 {
        #[serde(default = "default_delta_base")]
        delta_base: f64,
        #[serde(default = "default_eps_start")]
        eps_start: f64,
    },
    Fixed { k: usize },
}

pub(crate) fn default_delta_base() -> f64 {
    0.5
}

pub(crate) fn default_eps_start() -> f64 {
    0.5
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Sqrt => "sqrt",
            Schedule::Log => "log",
            Schedule::Prop12 { .. } => "prop12",
            Schedule::Fixed { .. } => "fixed",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ExperimentError> {
        match name {
            "sqrt" => Ok(Schedule::Sqrt),
            "log" => Ok(Schedule::Log),
            "prop12" => Ok(Schedule::Prop12 {
                delta_base: default_delta_base(),
                eps_start: default_eps_start(),
            }),
            other => Err(ExperimentError::Config(format!("unknown schedule `{other}` (sqrt, log, prop12)"))),
        }
    }

    /// Resolved form that answers `k_of_n` without rebuilding checkpoints.
    pub fn compile(&self) -> Result<KSchedule, ExperimentError> {
        Ok(match self {
            Schedule::Sqrt => KSchedule::Sqrt,
            Schedule::Log => KSchedule::Log,
            Schedule::Fixed { k } => {
                if *k == 0 {
                    return Err(ExperimentError::Config("fixed k must be positive".into()));
                }
                KSchedule::Fixed(*k)
            }
            Schedule::Prop12 { delta_base, eps_start } => {
                // checkpoints past ln n = 64 are never reached by a usize
                let cs = CounterexampleSchedule::build_until(*delta_base, *eps_start, |c| c.ln_n > 64.0 * std::f64::consts::LN_2)?;
                KSchedule::Checkpoints(cs.checkpoints.iter().map(|c| (c.ln_n, c.k)).collect())
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum KSchedule {
    Sqrt,
    Log,
    Fixed(usize),
    /// `(ln n_i, k_i)` in increasing order.
    Checkpoints(Vec<(f64, usize)>),
}

impl KSchedule {
    /// `k` for sample size `n ≥ 1`, clamped to `1..=n`.
    pub fn k_of_n(&self, n: usize) -> usize {
        let k = match self {
            KSchedule::Sqrt => (n as f64).sqrt().ceil() as usize,
            KSchedule::Log => (n as f64).ln().ceil() as usize,
            KSchedule::Fixed(k) => *k,
            KSchedule::Checkpoints(cs) => {
                let ln = (n as f64).ln();
                cs.iter().rev().find(|(l, _)| *l <= ln + 1e-12).map_or(1, |&(_, k)| k)
            }
        };
        k.clamp(1, n.max(1))
    }
}

/// `ln(-ln(1 - ε))` from `ln ε`.
fn ln_neg_ln1m(ln_eps: f64) -> f64 {
    if ln_eps < -18.0 {
        // -ln(1-ε) = ε(1 + ε/2 + ...)
        ln_eps + 0.5 * ln_eps.exp()
    } else {
        (-(-ln_eps.exp()).ln_1p()).ln()
    }
}

/// `ln(1 - e^{-s})` from `ln s`.
pub(crate) fn ln_one_minus_exp_neg(ln_s: f64) -> f64 {
    if ln_s < -18.0 {
        ln_s - 0.5 * ln_s.exp()
    } else {
        (-(-ln_s.exp()).exp_m1()).ln()
    }
}

fn ln_factorial(j: usize) -> f64 {
    (2..=j).map(|l| (l as f64).ln()).sum()
}

/// `P(Bin(n, ε) < k)` with `n = e^{ln_n}` and `ε = e^{ln_eps}`, summed
/// term by term in logarithms.
pub fn binomial_lower_tail(ln_n: f64, ln_eps: f64, k: usize) -> f64 {
    let n_ln_c = (ln_n + ln_neg_ln1m(ln_eps)).exp(); // -n ln(1-ε)
    let c = ln_neg_ln1m(ln_eps).exp();
    let mut total = 0.0;
    let mut ln_choose = 0.0;
    for j in 0..k {
        if j > 0 {
            let l = (j - 1) as f64;
            // ln(n - l) = ln n + ln(1 - l/n)
            let ln_nl = if l == 0.0 { ln_n } else { ln_n + (-(l.ln() - ln_n).exp()).ln_1p() };
            if !ln_nl.is_finite() {
                break;
            }
            ln_choose += ln_nl;
        }
        let ln_term = ln_choose - ln_factorial(j) + j as f64 * ln_eps - n_ln_c + j as f64 * c;
        total += ln_term.exp();
    }
    total
}

/// `P(at least one of n uniforms < ε) = 1 - (1-ε)^n`.
pub fn any_below_probability(ln_n: f64, ln_eps: f64) -> f64 {
    -(-(ln_n + ln_neg_ln1m(ln_eps)).exp()).exp_m1()
}

fn poisson_lower_tail(lambda: f64, k: usize) -> f64 {
    let mut term = (-lambda).exp();
    let mut total = 0.0;
    for j in 0..k {
        if j > 0 {
            term *= lambda / j as f64;
        }
        total += term;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub i: usize,
    pub k: usize,
    pub delta: f64,
    pub ln_n: f64,
    /// `ln ε_i`; the band is `[0, ε_i)`.
    pub ln_eps: f64,
    pub ln_eps_next: f64,
    /// `P(fewer than k of Z_1..Z_{n_i} in [0, ε_i))`.
    pub fail_count: f64,
    /// `P(some Z_j, j ≤ n_i, in [0, ε_{i+1}))`.
    pub fail_early: f64,
}

impl Checkpoint {
    pub fn certified(&self) -> bool {
        self.fail_count + self.fail_early < self.delta
    }
}

/// Checkpoints `i = 2, 3, ...` with `k_i = ⌈ln i⌉` and `δ_i = delta_base^i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleSchedule {
    pub delta_base: f64,
    pub eps_start: f64,
    pub checkpoints: Vec<Checkpoint>,
}

pub fn k_at_checkpoint(i: usize) -> usize {
    (i as f64).ln().ceil() as usize
}

fn integral_ln(ln_n: f64) -> f64 {
    if ln_n < 40.0 {
        ln_n.exp().ceil().ln()
    } else {
        ln_n
    }
}

impl CounterexampleSchedule {
    pub fn build(delta_base: f64, eps_start: f64, horizon: usize) -> Result<Self, ExperimentError> {
        if horizon < 2 {
            return Err(ExperimentError::Config("the horizon must be at least 2".into()));
        }
        Self::build_until(delta_base, eps_start, |c| c.i >= horizon)
    }

    fn build_until(
        delta_base: f64,
        eps_start: f64,
        stop: impl Fn(&Checkpoint) -> bool,
    ) -> Result<Self, ExperimentError> {
        if !(delta_base > 0.0 && delta_base < 1.0) {
            return Err(ExperimentError::Config(format!("delta base must lie in (0,1), got {delta_base}")));
        }
        if !(eps_start > 0.0 && eps_start < 1.0) {
            return Err(ExperimentError::Config(format!("starting band must lie in (0,1), got {eps_start}")));
        }
        let mut out = Vec::new();
        let mut ln_eps = eps_start.ln();
        let mut ln_prev_n = f64::NEG_INFINITY;
        for i in 2.. {
            let k = k_at_checkpoint(i);
            let delta = delta_base.powi(i as i32);
            if delta < 1e-300 || ln_eps < -1e300 {
                return Err(ExperimentError::Schedule { i });
            }
            // Poisson guess for the mean count in the band, then exact check
            let mut lambda = k as f64;
            while poisson_lower_tail(lambda, k) > 0.25 * delta {
                lambda *= 1.05;
            }
            let mut ln_n = integral_ln((lambda.ln() - ln_eps).max(ln_prev_n + 1e-9).max((k as f64).ln()));
            let mut fail_count = binomial_lower_tail(ln_n, ln_eps, k);
            let mut guard = 0;
            while fail_count >= 0.5 * delta {
                ln_n = integral_ln(ln_n + 0.05);
                fail_count = binomial_lower_tail(ln_n, ln_eps, k);
                guard += 1;
                if guard > 10_000 {
                    return Err(ExperimentError::Schedule { i });
                }
            }
            if ln_n < 40.0 {
                // smallest integer n that still passes
                let mut hi = ln_n.exp().round() as u64;
                let mut lo = (ln_prev_n.exp().round() as u64 + 1).max(k as u64);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if binomial_lower_tail((mid as f64).ln(), ln_eps, k) < 0.5 * delta {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                ln_n = (hi as f64).ln();
                fail_count = binomial_lower_tail(ln_n, ln_eps, k);
            }
            // ε_{i+1} with P(some of n_i below it) = δ/4
            let target = 0.25 * delta;
            let ln_s = (-(-target).ln_1p()).ln() - ln_n;
            let ln_eps_next = ln_one_minus_exp_neg(ln_s) - 1e-12;
            let fail_early = any_below_probability(ln_n, ln_eps_next);
            let c = Checkpoint {
                i,
                k,
                delta,
                ln_n,
                ln_eps,
                ln_eps_next,
                fail_count,
                fail_early,
            };
            if !c.certified() || !(ln_eps_next < ln_eps) || !(ln_n > ln_prev_n) {
                return Err(ExperimentError::Schedule { i });
            }
            let done = stop(&c);
            out.push(c);
            if done {
                break;
            }
            ln_prev_n = ln_n;
            ln_eps = ln_eps_next;
        }
        Ok(CounterexampleSchedule {
            delta_base,
            eps_start,
            checkpoints: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn presets() {
        let s = Schedule::Sqrt.compile().unwrap();
        assert_eq!(s.k_of_n(250), 16);
        assert_eq!(s.k_of_n(4000), 64);
        assert_eq!(s.k_of_n(1), 1);
        let l = Schedule::Log.compile().unwrap();
        assert_eq!(l.k_of_n(1), 1);
        assert_eq!(l.k_of_n(100), 5);
        for sched in [s, l] {
            let mut last = 0;
            for n in (1..1_000_000).step_by(997) {
                let k = sched.k_of_n(n);
                assert!(k >= last && k <= n);
                last = k;
            }
            assert!((sched.k_of_n(1_000_000) as f64) / 1e6 < 0.01);
        }
    }

    #[test]
    fn log_space_binomial_matches_statrs() {
        for (n, p, k) in [(4u64, 0.5, 1usize), (290, 0.0156, 2), (5000, 0.001, 3), (100, 0.3, 4)] {
            let want = Binomial::new(p, n).unwrap().cdf(k as u64 - 1);
            let got = binomial_lower_tail((n as f64).ln(), p.ln(), k);
            assert!((got - want).abs() < 1e-12 * want.max(1e-300) + 1e-15, "n={n} p={p}: {got} vs {want}");
            let early = any_below_probability((n as f64).ln(), p.ln());
            assert!((early - (1.0 - (1.0 - p).powi(n as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoints_are_certified() {
        let cs = CounterexampleSchedule::build(0.5, 0.5, 50).unwrap();
        assert_eq!(cs.checkpoints.len(), 49);
        assert_eq!(cs.checkpoints[0].k, 1);
        assert_eq!(cs.checkpoints[0].ln_n, 4f64.ln());
        for w in cs.checkpoints.windows(2) {
            assert!(w[0].certified());
            assert!(w[1].ln_n > w[0].ln_n);
            assert_eq!(w[1].ln_eps, w[0].ln_eps_next);
        }
        // the early checkpoints fit in integers: recheck them with statrs
        for c in cs.checkpoints.iter().filter(|c| c.ln_n < 30.0) {
            let n = c.ln_n.exp().round() as u64;
            let fail = Binomial::new(c.ln_eps.exp(), n).unwrap().cdf(c.k as u64 - 1);
            let early = 1.0 - (1.0 - c.ln_eps_next.exp()).powf(n as f64);
            assert!(fail + early < c.delta, "i={}", c.i);
        }
    }

    #[test]
    fn prop12_schedule_k() {
        let s = Schedule::from_name("prop12").unwrap().compile().unwrap();
        assert_eq!(s.k_of_n(1), 1);
        assert_eq!(s.k_of_n(4), 1);
        let KSchedule::Checkpoints(cs) = &s else { panic!() };
        // n_3 is the first checkpoint with k = 2
        let n3 = cs[1].0.exp().round() as usize;
        assert_eq!(s.k_of_n(n3), 2);
        assert_eq!(s.k_of_n(n3 - 1), 1);
    }
}
