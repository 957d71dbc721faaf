//! Monte-Carlo evaluation of the threshold-decoding achievability bound and
//! the converse bound, and comparison with the second-order prediction.
//!
//! Both bounds are probabilities of events on the four information densities
//! of a random sphere-coded block, so they are estimated together from one
//! set of samples:
//!
//! * converse: `Pr(ĩ11 ≤ log M1 − nγ ∪ ĩ21 ≤ log M2 − nγ) − 2e^{−nγ}`;
//! * achievability: `Pr(E11 ∪ E21 ∪ E12 ∪ E22) + K e^{−nγ}` with
//!   `E11 = {ĩ11 ≤ log M1 + nγ}`, `E21 = {ĩ21 ≤ log M2 + nγ}` and
//!   `E12`, `E22` comparing `ĩ12`, `ĩ22` with `log M1 M2 + nγ`.

use serde::{Deserialize, Serialize};

use crate::analytic_bounds::k_estimate;
use crate::channel::{first_order, second_order, ChannelParams};
use crate::densities::{info_densities_closed_form, SphereSample};
use crate::error::{domain, Error, Result};
use crate::mvn::{psi_upper_with, MvnSpec, PsiEstimate, QmcOptions};
use crate::region::{classify_target, RegionCase, SecondOrderPoint, TargetPoint};
use crate::special::phi;
use crate::stats::{fold_trials, Merge};

pub const MIN_TRIALS: u64 = 100;

/// Safety factor applied to the numeric `K` when the caller gives none.
pub const K_SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub n: usize,
    pub log_m1: f64,
    pub log_m2: f64,
    pub gamma: f64,
}

impl CodeSpec {
    /// `gamma = None` picks `log n / (2n)`.
    pub fn new(n: usize, log_m1: f64, log_m2: f64, gamma: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(domain("blocklength", n as f64));
        }
        for (what, v) in [("log_m1", log_m1), ("log_m2", log_m2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(what, v));
            }
        }
        let gamma = gamma.unwrap_or_else(|| default_gamma(n));
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(domain("gamma", gamma));
        }
        Ok(CodeSpec { n, log_m1, log_m2, gamma })
    }

    /// `log M_j = n κ_j + √n l_j`, clamped at 0.
    pub fn second_order(n: usize, tp: &TargetPoint, pt: SecondOrderPoint, gamma: Option<f64>) -> Result<Self> {
        let rn = (n as f64).sqrt();
        let m1 = (n as f64 * tp.kappa1 + rn * pt.l1).max(0.0);
        let m2 = (n as f64 * tp.kappa2 + rn * pt.l2).max(0.0);
        Self::new(n, m1, m2, gamma)
    }
}

pub fn default_gamma(n: usize) -> f64 {
    (n as f64).ln() / (2.0 * n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    AchievabilityUpper,
    ConverseLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub kind: BoundKind,
    /// Bound value clamped to `[0, 1]`.
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    /// Estimated union-event probability before the additive term.
    pub event_probability: f64,
    /// `K e^{−nγ}` (achievability) or `2 e^{−nγ}` (converse).
    pub additive: f64,
}

/// Hit counts of every event on shared samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub trials: u64,
    pub converse_union: u64,
    pub achievability_union: u64,
    /// `E11, E21, E12, E22` individually (achievability thresholds).
    pub single: [u64; 4],
}

impl Merge for EventCounts {
    fn merge(&mut self, o: &Self) {
        self.trials += o.trials;
        self.converse_union += o.converse_union;
        self.achievability_union += o.achievability_union;
        for i in 0..4 {
            self.single[i] += o.single[i];
        }
    }
}

impl EventCounts {
    fn frac(&self, c: u64) -> f64 {
        c as f64 / self.trials as f64
    }

    pub fn converse_probability(&self) -> f64 {
        self.frac(self.converse_union)
    }

    pub fn achievability_probability(&self) -> f64 {
        self.frac(self.achievability_union)
    }

    pub fn single_probability(&self, i: usize) -> f64 {
        self.frac(self.single[i])
    }
}

/// Counts threshold crossings over `trials` sphere-coded blocks.
pub fn count_events(ch: &ChannelParams, spec: &CodeSpec, trials: u64, seed: u64) -> Result<EventCounts> {
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { got: trials as usize, min: MIN_TRIALS as usize });
    }
    let slack = spec.n as f64 * spec.gamma;
    let sum = spec.log_m1 + spec.log_m2;
    Ok(fold_trials(
        trials,
        EventCounts::default,
        || SphereSample::zeros(spec.n),
        |s, acc, t| {
            s.draw(ch, seed, t);
            let d = info_densities_closed_form(ch, s);
            acc.trials += 1;
            if d.i11 <= spec.log_m1 - slack || d.i21 <= spec.log_m2 - slack {
                acc.converse_union += 1;
            }
            let hits = [
                d.i11 <= spec.log_m1 + slack,
                d.i21 <= spec.log_m2 + slack,
                d.i12 <= sum + slack,
                d.i22 <= sum + slack,
            ];
            for (c, h) in acc.single.iter_mut().zip(hits) {
                *c += h as u64;
            }
            if hits.iter().any(|&h| h) {
                acc.achievability_union += 1;
            }
        },
    ))
}

fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Resolves the `K` constant: the caller's value, or `K_SAFETY` times the
/// numeric estimate at `n`.
pub fn resolve_k(ch: &ChannelParams, n: usize, k: Option<f64>) -> Result<f64> {
    match k {
        Some(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Some(v) => Err(domain("K constant", v)),
        None => Ok(K_SAFETY * k_estimate(ch, n)?.total),
    }
}

pub fn achievability_from_counts(c: &EventCounts, spec: &CodeSpec, k: f64) -> BoundEstimate {
    let p = c.achievability_probability();
    let additive = k * (-(spec.n as f64) * spec.gamma).exp();
    BoundEstimate {
        kind: BoundKind::AchievabilityUpper,
        value: (p + additive).min(1.0),
        std_error: binomial_se(p, c.trials),
        trials: c.trials,
        event_probability: p,
        additive,
    }
}

pub fn converse_from_counts(c: &EventCounts, spec: &CodeSpec) -> BoundEstimate {
    let p = c.converse_probability();
    let additive = 2.0 * (-(spec.n as f64) * spec.gamma).exp();
    BoundEstimate {
        kind: BoundKind::ConverseLower,
        value: (p - additive).max(0.0),
        std_error: binomial_se(p, c.trials),
        trials: c.trials,
        event_probability: p,
        additive,
    }
}

/// Upper bound on the error probability of a threshold decoder. `k = None`
/// uses the numeric `K` with the safety factor.
pub fn achievability_bound(
    ch: &ChannelParams,
    spec: &CodeSpec,
    trials: u64,
    seed: u64,
    k: Option<f64>,
) -> Result<BoundEstimate> {
    let c = count_events(ch, spec, trials, seed)?;
    Ok(achievability_from_counts(&c, spec, resolve_k(ch, spec.n, k)?))
}

/// Lower bound on the error probability of any code of the given sizes.
pub fn converse_bound(ch: &ChannelParams, spec: &CodeSpec, trials: u64, seed: u64) -> Result<BoundEstimate> {
    let c = count_events(ch, spec, trials, seed)?;
    Ok(converse_from_counts(&c, spec))
}

/// Gaussian approximation of the converse bound:
/// `1 − Ψ(−√n(R − I − γ); 0, V_c) − 2e^{−nγ}`, unclamped.
pub fn converse_normal_approximation(ch: &ChannelParams, spec: &CodeSpec) -> Result<f64> {
    let f = first_order(ch);
    let s = second_order(ch);
    let n = spec.n as f64;
    let t = [
        -n.sqrt() * (spec.log_m1 / n - f.i11 - spec.gamma),
        -n.sqrt() * (spec.log_m2 / n - f.i21 - spec.gamma),
    ];
    let vc = MvnSpec::new(vec![0.0, 0.0], vec![s.v1, 0.0, 0.0, s.v2])?;
    let PsiEstimate { value, .. } = psi_upper_with(&t, &vc, QmcOptions::default())?;
    Ok(1.0 - value - 2.0 * (-n * spec.gamma).exp())
}

/// `1 − Φ(−l1/√V1) Φ(−l2/√V2)`.
pub fn theorem_prediction(ch: &ChannelParams, pt: SecondOrderPoint) -> f64 {
    let s = second_order(ch);
    1.0 - phi(-pt.l1 / s.v1.sqrt()) * phi(-pt.l2 / s.v2.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub code: CodeSpec,
    pub achievability: BoundEstimate,
    pub converse: BoundEstimate,
    pub prediction: f64,
    pub k: f64,
}

impl ExperimentRow {
    /// Raw achievability union probability minus the prediction.
    pub fn achievability_gap(&self) -> f64 {
        self.achievability.event_probability - self.prediction
    }

    /// Raw converse union probability minus the prediction.
    pub fn converse_gap(&self) -> f64 {
        self.converse.event_probability - self.prediction
    }
}

/// Runs both bounds at `log M_j = n κ_j + √n l_j` for each `n`. The trials of
/// blocklength `n_list[i]` use seed `seed + i`.
pub fn second_order_experiment(
    ch: &ChannelParams,
    tp: &TargetPoint,
    pt: SecondOrderPoint,
    n_list: &[usize],
    trials: u64,
    seed: u64,
    k: Option<f64>,
) -> Result<Vec<ExperimentRow>> {
    let region = classify_target(ch, tp)?;
    if region.case != RegionCase::Corner {
        return Err(Error::UnsupportedCase(format!("experiment needs the corner case, got {:?}", region.case)));
    }
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { got: trials as usize, min: MIN_TRIALS as usize });
    }
    let prediction = theorem_prediction(ch, pt);
    n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let code = CodeSpec::second_order(n, tp, pt, None)?;
            let kv = resolve_k(ch, n, k)?;
            let c = count_events(ch, &code, trials, seed.wrapping_add(i as u64))?;
            Ok(ExperimentRow {
                n,
                code,
                achievability: achievability_from_counts(&c, &code, kv),
                converse: converse_from_counts(&c, &code),
                prediction,
                k: kv,
            })
        })
        .collect()
}
