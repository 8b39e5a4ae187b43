//! Floored Markov assignment rules.
//!
//! Every rule maps the current beliefs to a distribution over arms in which
//! each arm keeps at least `epsilon` probability. `epsilon` here is the
//! per-arm floor; a "total exploration rate" of `e` over `M + 1` arms is a
//! floor of `e / (M + 1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefBank;

pub const DEFAULT_THOMPSON_DRAWS: usize = 1024;

/// Slack allowed when comparing a floor against `1/(M+1)`.
const FLOOR_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("epsilon {epsilon} outside (0, {max}]")]
    EpsilonOutOfRange { epsilon: f64, max: f64 },
    #[error("payoff index {0} is not finite")]
    NonFinitePayoff(f64),
    #[error("h must be positive and finite, got {0}")]
    InvalidH(f64),
    #[error("perturbed-softmax requires h")]
    MissingH,
    #[error("thompson_draws must be at least 1")]
    ZeroDraws,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("at least one arm is required")]
    NoArms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyFamily {
    EpsilonGreedy,
    PerturbedSoftmax,
    ThompsonFloored,
}

fn default_draws() -> usize {
    DEFAULT_THOMPSON_DRAWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub family: PolicyFamily,
    /// Per-arm probability floor.
    pub epsilon: f64,
    /// Inverse temperature. Required for softmax; for Thompson it switches
    /// from flooring `pi` directly to flooring `softmax(h * pi)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_draws")]
    pub thompson_draws: usize,
}

impl PolicySpec {
    pub fn epsilon_greedy(epsilon: f64) -> Self {
        Self {
            family: PolicyFamily::EpsilonGreedy,
            epsilon,
            h: None,
            thompson_draws: DEFAULT_THOMPSON_DRAWS,
        }
    }

    pub fn softmax(epsilon: f64, h: f64) -> Self {
        Self {
            family: PolicyFamily::PerturbedSoftmax,
            epsilon,
            h: Some(h),
            thompson_draws: DEFAULT_THOMPSON_DRAWS,
        }
    }

    pub fn thompson(epsilon: f64, draws: usize) -> Self {
        Self {
            family: PolicyFamily::ThompsonFloored,
            epsilon,
            h: None,
            thompson_draws: draws,
        }
    }

    /// Checks the policy against an arm count. The floor must be strictly
    /// positive here even though the pure rules accept 0.
    pub fn validate(&self, arms: usize) -> Result<(), PolicyError> {
        check_floor(self.epsilon, arms, false)?;
        match self.family {
            PolicyFamily::PerturbedSoftmax => check_h(self.h.ok_or(PolicyError::MissingH)?)?,
            PolicyFamily::ThompsonFloored => {
                if self.thompson_draws == 0 {
                    return Err(PolicyError::ZeroDraws);
                }
                if let Some(h) = self.h {
                    check_h(h)?;
                }
            }
            PolicyFamily::EpsilonGreedy => {}
        }
        Ok(())
    }

    /// Assignment distribution given the current beliefs. Softmax uses the
    /// aggregate posterior means as its payoff index.
    pub fn distribution<R: Rng + ?Sized>(
        &self,
        bank: &BeliefBank,
        rng: &mut R,
    ) -> Result<ActionDistribution, PolicyError> {
        match self.family {
            PolicyFamily::EpsilonGreedy => epsilon_greedy_probs(bank.aggregate(), self.epsilon),
            PolicyFamily::PerturbedSoftmax => softmax_probs(
                bank.aggregate(),
                self.h.ok_or(PolicyError::MissingH)?,
                self.epsilon,
            ),
            PolicyFamily::ThompsonFloored => {
                let pi = thompson_probs(bank, self.thompson_draws, 0.0, rng)?;
                match self.h {
                    Some(h) => softmax_probs(&pi.probs, h, self.epsilon),
                    None => floor_mix(pi.probs, self.epsilon),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_floor(epsilon: f64, arms: usize, allow_zero: bool) -> Result<(), PolicyError> {
    if arms == 0 {
        return Err(PolicyError::NoArms);
    }
    let max = 1.0 / arms as f64;
    let low_ok = if allow_zero {
        epsilon >= 0.0
    } else {
        epsilon > 0.0
    };
    if !(low_ok && epsilon <= max + FLOOR_SLACK) {
        return Err(PolicyError::EpsilonOutOfRange { epsilon, max });
    }
    Ok(())
}

fn check_h(h: f64) -> Result<(), PolicyError> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(PolicyError::InvalidH(h))
    }
}

/// Highest index attaining the maximum.
pub fn argmax_last(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v >= values[best] {
            best = i;
        }
    }
    best
}

/// `(M+1)·ε · uniform + (1 − (M+1)·ε) · p`.
fn floor_mix(p: Vec<f64>, epsilon: f64) -> Result<ActionDistribution, PolicyError> {
    let arms = p.len();
    check_floor(epsilon, arms, true)?;
    let explore = (arms as f64 * epsilon).min(1.0);
    let rest = 1.0 - explore;
    Ok(ActionDistribution {
        probs: p.into_iter().map(|x| epsilon + rest * x).collect(),
    })
}

/// Each arm gets `epsilon`; the highest-mean arm (last on ties) also gets the
/// remaining `1 − (M+1)·epsilon`.
pub fn epsilon_greedy_probs(
    aggregate: &[f64],
    epsilon: f64,
) -> Result<ActionDistribution, PolicyError> {
    check_floor(epsilon, aggregate.len(), false)?;
    let arms = aggregate.len();
    let mut probs = vec![epsilon; arms];
    let rest = (1.0 - arms as f64 * epsilon).max(0.0);
    probs[argmax_last(aggregate)] += rest;
    Ok(ActionDistribution { probs })
}

/// Softmax of `h · payoff`, mixed with the uniform floor.
pub fn softmax_probs(
    payoffs: &[f64],
    h: f64,
    epsilon: f64,
) -> Result<ActionDistribution, PolicyError> {
    check_h(h)?;
    if let Some(x) = payoffs.iter().find(|x| !x.is_finite()) {
        return Err(PolicyError::NonFinitePayoff(*x));
    }
    check_floor(epsilon, payoffs.len(), true)?;
    let scaled: Vec<f64> = payoffs.iter().map(|p| h * p).collect();
    floor_mix(crate::belief::softmax_logs(&scaled), epsilon)
}

/// Monte Carlo estimate of the probability that each arm has the highest
/// mean under the aggregate posterior, floored. Each draw samples every arm
/// once, in index order; ties within a draw go to the highest index.
pub fn thompson_probs<R: Rng + ?Sized>(
    bank: &BeliefBank,
    draws: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<ActionDistribution, PolicyError> {
    if draws == 0 {
        return Err(PolicyError::ZeroDraws);
    }
    let arms = bank.arms();
    check_floor(epsilon, arms, true)?;
    let mut wins = vec![0u64; arms];
    let mut sample = vec![0.0; arms];
    for _ in 0..draws {
        for (d, s) in sample.iter_mut().enumerate() {
            *s = bank.sample_aggregate_posterior(d, rng);
        }
        wins[argmax_last(&sample)] += 1;
    }
    let pi = wins.iter().map(|w| *w as f64 / draws as f64).collect();
    floor_mix(pi, epsilon)
}

/// Inverse-CDF draw over arms in index order.
pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (d, p) in dist.probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = d;
        }
        acc += p;
        if u < acc {
            return d;
        }
    }
    last_positive
}
