//! Threshold stopping rule.
//!
//! After burn-in `B`, the experiment stops at the first stage where some arm's
//! aggregate mean beats every other arm by more than the sum of their cutoffs
//!
//! ```text
//! c_t(gamma, d) = Σ_o gamma · alpha[o][d] / (f_t(d) + nu0[o][d] / t)
//! ```
//!
//! with `gamma_t = log(t) · sqrt(A / t)` unless an explicit sequence is given.
//! `A` can be calibrated so that `3(M+1)/(A−1) · (B^{−(A−1)} − T^{−(A−1)}) ≤ beta`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefBank;
use crate::policy::argmax_last;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoppingError {
    #[error("cutoffs are undefined at t = 0")]
    ZeroStage,
    #[error("gamma schedule needs t >= 2 without an override (t = {0})")]
    GammaUndefined(u64),
    #[error("gamma override sequence has {len} entries, stage {t} requested")]
    OverrideTooShort { t: u64, len: usize },
    #[error("invalid stopping parameters: {0}")]
    InvalidSpec(String),
    #[error("no A <= {max} satisfies the tolerance {beta}")]
    NoFeasibleA { beta: f64, max: f64 },
    #[error("calibration objective is not monotone on the search range")]
    NonMonotone,
    #[error("decision did not stop")]
    NotStopped,
}

/// Explicit `gamma_t` values. A sequence gives `gamma_t` at position `t − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaOverride {
    Constant(f64),
    Sequence(Vec<f64>),
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSpec {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub burn_in: u64,
    pub horizon: u64,
    /// `A` in the gamma schedule; calibrated from `beta` when absent.
    #[serde(rename = "gamma_A", default, skip_serializing_if = "Option::is_none")]
    pub gamma_a: Option<f64>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_override: Option<GammaOverride>,
}

pub const CALIBRATION_MAX_A: f64 = 64.0;
const CALIBRATION_MIN_A: f64 = 1.0 + 1e-9;
const CALIBRATION_TOL: f64 = 1e-9;

impl StoppingSpec {
    pub fn new(burn_in: u64, horizon: u64, beta: f64) -> Self {
        Self {
            enabled: true,
            burn_in,
            horizon,
            gamma_a: None,
            beta,
            gamma_override: None,
        }
    }

    /// A spec that never stops before the horizon.
    pub fn disabled(horizon: u64) -> Self {
        Self {
            enabled: false,
            ..Self::new(1, horizon, 0.5)
        }
    }

    pub fn validate(&self) -> Result<(), StoppingError> {
        let bad = |m: String| Err(StoppingError::InvalidSpec(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !self.enabled {
            return Ok(());
        }
        if self.burn_in == 0 {
            return bad("burn_in must be at least 1".into());
        }
        if self.burn_in > self.horizon {
            return bad(format!(
                "burn_in {} exceeds horizon {}",
                self.burn_in, self.horizon
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta {} outside (0, 1)", self.beta));
        }
        if let Some(a) = self.gamma_a {
            if !(a.is_finite() && a > 1.0) {
                return bad(format!("gamma_A {a} must exceed 1"));
            }
        }
        match &self.gamma_override {
            Some(GammaOverride::Constant(g)) if !(g.is_finite() && *g >= 0.0) => {
                bad(format!("gamma override {g} must be finite and nonnegative"))
            }
            Some(GammaOverride::Sequence(seq)) => {
                if seq.len() < self.horizon as usize {
                    bad(format!(
                        "gamma override has {} entries, horizon is {}",
                        seq.len(),
                        self.horizon
                    ))
                } else if seq.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                    bad("gamma override entries must be finite and nonnegative".into())
                } else {
                    Ok(())
                }
            }
            Some(_) => Ok(()),
            None if self.burn_in < 2 => bad("burn_in must be at least 2 without a gamma override".into()),
            None => Ok(()),
        }
    }

    /// Copy with `gamma_A` filled in by calibration when it was absent.
    pub fn resolved(&self, arms: usize) -> Result<Self, StoppingError> {
        self.validate()?;
        let mut out = self.clone();
        if self.enabled && self.gamma_override.is_none() && self.gamma_a.is_none() {
            out.gamma_a = Some(calibrate(self.beta, self.burn_in, self.horizon, arms)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub stop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_arm: Option<usize>,
    /// `max_d min_{m≠d} [zeta(d) − zeta(m) − c(d, m)]`; absent before burn-in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// `cutoffs[d][m] = c(d) + c(m)` off the diagonal, 0 on it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cutoffs: Vec<Vec<f64>>,
}

/// `c_t(gamma, d)` for a single arm.
pub fn arm_cutoff(bank: &BeliefBank, d: usize, gamma: f64) -> Result<f64, StoppingError> {
    let t = bank.t();
    if t == 0 {
        return Err(StoppingError::ZeroStage);
    }
    let t = t as f64;
    let f = bank.stats()[d].n as f64 / t;
    Ok((0..bank.source_count())
        .map(|o| gamma * bank.alpha(o, d) / (f + bank.sources()[o].nu0[d] / t))
        .sum())
}

/// `c_t(gamma, d, m) = c_t(gamma, d) + c_t(gamma, m)`.
pub fn cutoff(bank: &BeliefBank, d: usize, m: usize, gamma: f64) -> Result<f64, StoppingError> {
    Ok(arm_cutoff(bank, d, gamma)? + arm_cutoff(bank, m, gamma)?)
}

/// `gamma_t`: the override when present, else `log(t) · sqrt(A) / sqrt(t)`.
pub fn gamma_schedule(spec: &StoppingSpec, t: u64) -> Result<f64, StoppingError> {
    match &spec.gamma_override {
        Some(GammaOverride::Constant(g)) => Ok(*g),
        Some(GammaOverride::Sequence(seq)) => {
            if t == 0 {
                return Err(StoppingError::ZeroStage);
            }
            seq.get(t as usize - 1)
                .copied()
                .ok_or(StoppingError::OverrideTooShort { t, len: seq.len() })
        }
        None => {
            if t < 2 {
                return Err(StoppingError::GammaUndefined(t));
            }
            let a = spec
                .gamma_a
                .ok_or_else(|| StoppingError::InvalidSpec("gamma_A not resolved".into()))?;
            let tf = t as f64;
            Ok(tf.ln() * a.sqrt() / tf.sqrt())
        }
    }
}

/// Stop decision from aggregate means and per-arm cutoffs `c(d)`.
pub fn decide(aggregate: &[f64], arm_cutoffs: &[f64]) -> StopDecision {
    let arms = aggregate.len();
    let mut cutoffs = vec![vec![0.0; arms]; arms];
    let mut per_arm = vec![f64::INFINITY; arms];
    for d in 0..arms {
        for m in 0..arms {
            if m == d {
                continue;
            }
            let c = arm_cutoffs[d] + arm_cutoffs[m];
            cutoffs[d][m] = c;
            per_arm[d] = per_arm[d].min(aggregate[d] - aggregate[m] - c);
        }
    }
    let best = argmax_last(&per_arm);
    let margin = per_arm[best];
    let stop = margin > 0.0;
    StopDecision {
        stop,
        chosen_arm: stop.then_some(best),
        margin: margin.is_finite().then_some(margin),
        cutoffs,
    }
}

/// Evaluates the rule on the bank's current beliefs at stage `t`.
pub fn should_stop(
    bank: &BeliefBank,
    spec: &StoppingSpec,
    t: u64,
) -> Result<StopDecision, StoppingError> {
    if !spec.enabled || t < spec.burn_in {
        return Ok(StopDecision {
            stop: false,
            chosen_arm: None,
            margin: None,
            cutoffs: Vec::new(),
        });
    }
    let gamma = gamma_schedule(spec, t)?;
    let cuts = (0..bank.arms())
        .map(|d| arm_cutoff(bank, d, gamma))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(decide(bank.aggregate(), &cuts))
}

/// Left side of the calibration inequality,
/// `3(M+1)/(A−1) · (B^{−(A−1)} − T^{−(A−1)})`, with `arms = M + 1`.
pub fn calibration_objective(a: f64, burn_in: u64, horizon: u64, arms: usize) -> f64 {
    let x = a - 1.0;
    let lb = (burn_in as f64).ln();
    let lt = (horizon as f64).ln();
    // B^{-x} − T^{-x} = B^{-x} (1 − e^{−x(ln T − ln B)}), kept accurate near x = 0.
    let diff = -(-x * lb).exp() * (-x * (lt - lb)).exp_m1();
    3.0 * arms as f64 / x * diff
}

/// Smallest `A` in `(1, 64]` meeting the tolerance `beta`, to within 1e-9.
pub fn calibrate(beta: f64, burn_in: u64, horizon: u64, arms: usize) -> Result<f64, StoppingError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(StoppingError::InvalidSpec(format!("beta {beta} outside (0, 1)")));
    }
    if burn_in < 2 || burn_in >= horizon {
        return Err(StoppingError::InvalidSpec(format!(
            "calibration needs 2 <= B < T (B = {burn_in}, T = {horizon})"
        )));
    }
    let g = |a: f64| calibration_objective(a, burn_in, horizon, arms);
    const CHECKS: usize = 2000;
    let mut prev = g(CALIBRATION_MIN_A);
    for i in 1..=CHECKS {
        let a = CALIBRATION_MIN_A + (CALIBRATION_MAX_A - CALIBRATION_MIN_A) * i as f64 / CHECKS as f64;
        let cur = g(a);
        if cur > prev * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            return Err(StoppingError::NonMonotone);
        }
        prev = cur;
    }
    if g(CALIBRATION_MAX_A) > beta {
        return Err(StoppingError::NoFeasibleA {
            beta,
            max: CALIBRATION_MAX_A,
        });
    }
    if g(CALIBRATION_MIN_A) <= beta {
        return Ok(CALIBRATION_MIN_A);
    }
    let (mut lo, mut hi) = (CALIBRATION_MIN_A, CALIBRATION_MAX_A);
    while hi - lo > CALIBRATION_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= beta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Whether recommending `chosen` is a mistake: its true mean is below the best.
pub fn is_mistake_arm(chosen: usize, truth: &[f64]) -> bool {
    let best = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    truth[chosen] < best
}

pub fn is_mistake(decision: &StopDecision, truth: &[f64]) -> Result<bool, StoppingError> {
    match (decision.stop, decision.chosen_arm) {
        (true, Some(arm)) => Ok(is_mistake_arm(arm, truth)),
        _ => Err(StoppingError::NotStopped),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{ArmStats, SourcePrior};

    #[test]
    fn cutoff_examples() {
        let src = vec![SourcePrior::uniform(2, 0.0, 1.0)];
        let bank =
            BeliefBank::from_stats(src, vec![ArmStats::new(50, 0.0), ArmStats::new(50, 0.0)], 100)
                .unwrap();
        let c = arm_cutoff(&bank, 0, 0.1).unwrap();
        assert!((c - 0.1 / 0.51).abs() < 1e-15);
        assert!((c - 0.19608).abs() < 5e-6);
        assert_eq!(arm_cutoff(&bank, 0, 0.0).unwrap(), 0.0);
        assert!((cutoff(&bank, 0, 1, 0.1).unwrap() - 2.0 * c).abs() < 1e-15);

        let two = vec![SourcePrior::uniform(2, 0.0, 1.0), SourcePrior::uniform(2, 3.0, 1.0)];
        let mut bank2 = BeliefBank::from_stats(
            two,
            vec![ArmStats::new(50, 0.0), ArmStats::new(50, 0.0)],
            100,
        )
        .unwrap();
        bank2.set_weights(0, &[0.5, 0.5]).unwrap();
        assert!((arm_cutoff(&bank2, 0, 0.1).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn cutoff_at_zero_stage() {
        let bank = BeliefBank::new(vec![SourcePrior::uniform(2, 0.0, 1.0)]).unwrap();
        assert_eq!(arm_cutoff(&bank, 0, 0.1), Err(StoppingError::ZeroStage));
    }

    #[test]
    fn decide_examples() {
        let d = decide(&[1.0, 1.5], &[0.2, 0.2]);
        assert!(d.stop);
        assert_eq!(d.chosen_arm, Some(1));
        assert!((d.margin.unwrap() - 0.1).abs() < 1e-12);
        let d = decide(&[1.0, 1.5], &[0.3, 0.3]);
        assert!(!d.stop);
        assert!((d.margin.unwrap() + 0.1).abs() < 1e-12);
    }

    #[test]
    fn never_before_burn_in() {
        let mut spec = StoppingSpec::new(50, 100, 0.01);
        spec.gamma_override = Some(GammaOverride::Constant(0.0));
        let src = vec![SourcePrior::new(vec![0.0, 100.0], vec![1.0, 1.0])];
        let bank =
            BeliefBank::from_stats(src, vec![ArmStats::new(10, 0.0), ArmStats::new(10, 1000.0)], 20)
                .unwrap();
        assert!(!should_stop(&bank, &spec, 20).unwrap().stop);
        assert!(should_stop(&bank, &spec, 50).unwrap().stop);
    }

    #[test]
    fn gamma_examples() {
        let mut spec = StoppingSpec::new(2, 10, 0.1);
        spec.gamma_a = Some(1.0);
        let t = 7u64;
        let g1 = gamma_schedule(&spec, t).unwrap();
        assert!((g1 - (t as f64).ln() / (t as f64).sqrt()).abs() < 1e-15);
        spec.gamma_a = Some(4.0);
        assert!((gamma_schedule(&spec, t).unwrap() - 2.0 * g1).abs() < 1e-15);
        assert!(gamma_schedule(&spec, 1).is_err());
        spec.gamma_override = Some(GammaOverride::Constant(0.05));
        assert_eq!(gamma_schedule(&spec, 1).unwrap(), 0.05);
        assert_eq!(gamma_schedule(&spec, 999).unwrap(), 0.05);
    }

    #[test]
    fn gamma_closed_form_at_e_squared() {
        // t = e^2 is not an integer stage, so evaluate the closed form directly.
        let t = std::f64::consts::E.powi(2);
        let g = t.ln() * 1f64.sqrt() / t.sqrt();
        assert!((g - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert!((g - 0.73576).abs() < 5e-6);
    }

    #[test]
    fn calibrate_examples() {
        let a = calibrate(0.01, 100, 1000, 2).unwrap();
        assert!(a > 2.0 && a < 2.5, "{a}");
        assert!(calibration_objective(a, 100, 1000, 2) <= 0.01);
        assert!(calibration_objective(a - 1e-6, 100, 1000, 2) > 0.01);
        let g25 = calibration_objective(2.5, 100, 1000, 2);
        assert!((g25 - 4.0 * (100f64.powf(-1.5) - 1000f64.powf(-1.5))).abs() < 1e-15);
        assert!((g25 - 3.87e-3).abs() < 1e-5);
        let a = calibrate(g25 * (1.0 - 1e-12), 100, 1000, 2).unwrap();
        assert!((a - 2.5).abs() < 1e-6, "{a}");
    }

    #[test]
    fn calibrate_loose_tolerance_near_lower_boundary() {
        // With T close to B the objective is small even as A -> 1.
        let a = calibrate(0.999, 100, 110, 2).unwrap();
        assert!(a < 1.0 + 1e-6, "{a}");
    }

    #[test]
    fn calibrate_errors() {
        assert!(matches!(
            calibrate(1e-300, 2, 1_000_000, 2),
            Err(StoppingError::NoFeasibleA { .. })
        ));
        assert!(calibrate(0.01, 100, 100, 2).is_err());
    }

    #[test]
    fn mistake_examples() {
        let stop = |arm| StopDecision {
            stop: true,
            chosen_arm: Some(arm),
            margin: Some(0.1),
            cutoffs: vec![],
        };
        assert!(!is_mistake(&stop(1), &[1.0, 1.3]).unwrap());
        assert!(is_mistake(&stop(0), &[1.0, 1.3]).unwrap());
        assert!(!is_mistake(&stop(0), &[2.0, 2.0]).unwrap());
        assert!(!is_mistake(&stop(1), &[2.0, 2.0]).unwrap());
        let not = StopDecision {
            stop: false,
            chosen_arm: None,
            margin: None,
            cutoffs: vec![],
        };
        assert_eq!(is_mistake(&not, &[0.0, 1.0]), Err(StoppingError::NotStopped));
    }
}
