//! Gaussian multi-prior learning model.
//!
//! Each information source `o` holds a Gaussian prior per arm with mean
//! `zeta0[d]` and conviction `nu0[d]` (an effective prior sample count). The
//! subjective outcome model is `N(theta, 1)`, so every source's posterior stays
//! Gaussian and is summarised by a mean and a precision. Sources are combined
//! with weights equal to the posterior probability of each source's model
//! given the arm's data, which for this model reduces to a Gaussian predictive
//! density of the sample mean:
//!
//! ```text
//! alpha[o][d] ∝ phi(m[d] - zeta0[o][d]; 0, 1/nu0[o][d] + 1/N[d])
//! ```
//!
//! The aggregate posterior mean `zeta_alpha[d] = Σ_o alpha[o][d] · zeta[o][d]`
//! is what policies and the stopping rule act on.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("arm {arm} out of range (bank has {arms} arms)")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("outcome {0} is not finite")]
    NonFiniteOutcome(f64),
    #[error("experiment already stopped; no further updates accepted")]
    Stopped,
    #[error("at least one source is required")]
    NoSources,
    #[error("source {source_index}: {message}")]
    InvalidSource { source_index: usize, message: String },
}

/// One information source: per-arm prior means and convictions.
///
/// The source's id is its position in the bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePrior {
    pub zeta0: Vec<f64>,
    pub nu0: Vec<f64>,
}

impl SourcePrior {
    pub fn new(zeta0: Vec<f64>, nu0: Vec<f64>) -> Self {
        Self { zeta0, nu0 }
    }

    /// Same prior mean and conviction for every arm.
    pub fn uniform(arms: usize, zeta0: f64, nu0: f64) -> Self {
        Self::new(vec![zeta0; arms], vec![nu0; arms])
    }

    pub fn arms(&self) -> usize {
        self.zeta0.len()
    }

    fn check(&self, index: usize, arms: usize) -> Result<(), BeliefError> {
        let bad = |message: String| BeliefError::InvalidSource {
            source_index: index,
            message,
        };
        if self.zeta0.len() != arms || self.nu0.len() != arms {
            return Err(bad(format!(
                "expected {arms} arms, got zeta0={} nu0={}",
                self.zeta0.len(),
                self.nu0.len()
            )));
        }
        if let Some(z) = self.zeta0.iter().find(|z| !z.is_finite()) {
            return Err(bad(format!("zeta0 entry {z} is not finite")));
        }
        if let Some(n) = self.nu0.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return Err(bad(format!("nu0 entry {n} must be positive and finite")));
        }
        Ok(())
    }
}

/// Sufficient statistics for one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub n: u64,
    pub sum_y: f64,
}

impl ArmStats {
    pub fn new(n: u64, sum_y: f64) -> Self {
        Self { n, sum_y }
    }

    /// Sample mean `m_t(d)`; `None` before the first pull.
    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum_y / self.n as f64)
    }
}

/// Closed-form posterior of one source for one arm: `(mean, precision)`.
///
/// `mean = N/(N+nu0) · m + nu0/(N+nu0) · zeta0`, `precision = N + nu0`.
/// With no data this is the prior itself.
pub fn batch_posterior(zeta0: f64, nu0: f64, stats: ArmStats) -> (f64, f64) {
    let n = stats.n as f64;
    let precision = n + nu0;
    if stats.n == 0 {
        return (zeta0, nu0);
    }
    let m = stats.sum_y / n;
    ((n / precision) * m + (nu0 / precision) * zeta0, precision)
}

/// Aggregation weights for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: Vec<f64>,
    /// True when the arm has never been pulled and the weights are the
    /// uniform convention rather than data-driven.
    pub prior_stage: bool,
}

/// Log of the Gaussian predictive density of the sample mean under source
/// `(zeta0, nu0)`, up to the additive constant shared by all sources.
pub(crate) fn log_predictive(m: f64, zeta0: f64, nu0: f64, n: f64) -> f64 {
    let var = (n + nu0) / (n * nu0);
    let dev = m - zeta0;
    -0.5 * var.ln() - 0.5 * dev * dev / var
}

/// Normalises log-weights with log-sum-exp.
pub(crate) fn softmax_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Weights from prior parameters and the arm's statistics.
pub fn weights_from_stats(sources: &[SourcePrior], arm: usize, stats: ArmStats) -> Weights {
    let count = sources.len();
    match stats.mean() {
        None => Weights {
            alpha: vec![1.0 / count as f64; count],
            prior_stage: true,
        },
        Some(m) => {
            let n = stats.n as f64;
            let logs: Vec<f64> = sources
                .iter()
                .map(|s| log_predictive(m, s.zeta0[arm], s.nu0[arm], n))
                .collect();
            Weights {
                alpha: softmax_logs(&logs),
                prior_stage: false,
            }
        }
    }
}

/// Per-arm posterior state for every source plus the aggregation weights.
///
/// Matrices are indexed `[source][arm]`. The bank has a single writer; clone
/// it to hand out read-only snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefBank {
    sources: Vec<SourcePrior>,
    stats: Vec<ArmStats>,
    t: u64,
    zeta: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    aggregate: Vec<f64>,
    #[serde(default)]
    stopped: bool,
}

impl BeliefBank {
    pub fn new(sources: Vec<SourcePrior>) -> Result<Self, BeliefError> {
        let first = sources.first().ok_or(BeliefError::NoSources)?;
        let arms = first.arms();
        if arms == 0 {
            return Err(BeliefError::InvalidSource {
                source_index: 0,
                message: "at least one arm is required".into(),
            });
        }
        for (i, s) in sources.iter().enumerate() {
            s.check(i, arms)?;
        }
        let count = sources.len();
        let zeta = sources.iter().map(|s| s.zeta0.clone()).collect();
        let nu = sources.iter().map(|s| s.nu0.clone()).collect();
        let alpha = vec![vec![1.0 / count as f64; arms]; count];
        let mut bank = Self {
            sources,
            stats: vec![ArmStats::default(); arms],
            t: 0,
            zeta,
            nu,
            alpha,
            aggregate: vec![0.0; arms],
            stopped: false,
        };
        for d in 0..arms {
            bank.aggregate[d] = bank.aggregate_mean(d);
        }
        Ok(bank)
    }

    pub fn arms(&self) -> usize {
        self.stats.len()
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[SourcePrior] {
        &self.sources
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    /// Number of completed stages (observations absorbed).
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Posterior mean of source `o` for arm `d`.
    pub fn zeta(&self, o: usize, d: usize) -> f64 {
        self.zeta[o][d]
    }

    /// Posterior precision of source `o` for arm `d`.
    pub fn nu(&self, o: usize, d: usize) -> f64 {
        self.nu[o][d]
    }

    pub fn alpha(&self, o: usize, d: usize) -> f64 {
        self.alpha[o][d]
    }

    /// Weight vector over sources for arm `d`.
    pub fn alpha_for_arm(&self, d: usize) -> Vec<f64> {
        self.alpha.iter().map(|row| row[d]).collect()
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    /// Realised share of stages assigned to arm `d`, `N_t(d)/t` (0 at t = 0).
    pub fn frequency(&self, d: usize) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.stats[d].n as f64 / self.t as f64
        }
    }

    fn check_arm(&self, arm: usize) -> Result<(), BeliefError> {
        if arm >= self.arms() {
            Err(BeliefError::ArmOutOfRange {
                arm,
                arms: self.arms(),
            })
        } else {
            Ok(())
        }
    }

    /// Absorbs outcome `y` for `arm` using the one-step Gaussian recursion.
    ///
    /// Only the chosen arm's posteriors, weights and aggregate change. The
    /// stage counter is advanced separately with [`BeliefBank::advance_stage`].
    pub fn update_posterior(&mut self, arm: usize, y: f64) -> Result<(), BeliefError> {
        if self.stopped {
            return Err(BeliefError::Stopped);
        }
        self.check_arm(arm)?;
        if !y.is_finite() {
            return Err(BeliefError::NonFiniteOutcome(y));
        }
        for o in 0..self.sources.len() {
            let prev = self.nu[o][arm];
            let next = prev + 1.0;
            self.zeta[o][arm] = y / next + (prev / next) * self.zeta[o][arm];
            self.nu[o][arm] = next;
        }
        let stats = &mut self.stats[arm];
        stats.n += 1;
        stats.sum_y += y;
        let w = weights_from_stats(&self.sources, arm, *stats);
        for (o, a) in w.alpha.into_iter().enumerate() {
            self.alpha[o][arm] = a;
        }
        self.aggregate[arm] = self.aggregate_mean(arm);
        Ok(())
    }

    pub fn advance_stage(&mut self) {
        self.t += 1;
    }

    pub fn mark_stopped(&mut self) {
        self.stopped = true;
    }

    /// Reopens a bank stopped by [`BeliefBank::mark_stopped`].
    pub fn reopen(&mut self) {
        self.stopped = false;
    }

    /// Recomputes the weights for `arm` from scratch.
    pub fn compute_weights(&self, arm: usize) -> Result<Weights, BeliefError> {
        self.check_arm(arm)?;
        Ok(weights_from_stats(&self.sources, arm, self.stats[arm]))
    }

    /// `Σ_o alpha[o][arm] · zeta[o][arm]`, kept inside the hull of the
    /// per-source means.
    pub fn aggregate_mean(&self, arm: usize) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for o in 0..self.sources.len() {
            let z = self.zeta[o][arm];
            lo = lo.min(z);
            hi = hi.max(z);
            acc += self.alpha[o][arm] * z;
        }
        acc.clamp(lo, hi)
    }

    /// Draws from the aggregate (mixture) posterior of `arm`: a source with
    /// probability `alpha`, then that source's Gaussian posterior.
    pub fn sample_aggregate_posterior<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let last = self.sources.len() - 1;
        let mut acc = 0.0;
        let mut chosen = last;
        for o in 0..self.sources.len() {
            acc += self.alpha[o][arm];
            if u < acc {
                chosen = o;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        self.zeta[chosen][arm] + z / self.nu[chosen][arm].sqrt()
    }

    /// Replaces the weights of one arm. Used by tests and tools that need to
    /// evaluate downstream rules at prescribed weights.
    pub fn set_weights(&mut self, arm: usize, alpha: &[f64]) -> Result<(), BeliefError> {
        self.check_arm(arm)?;
        for (o, a) in alpha.iter().enumerate().take(self.sources.len()) {
            self.alpha[o][arm] = *a;
        }
        self.aggregate[arm] = self.aggregate_mean(arm);
        Ok(())
    }

    /// Builds a bank at stage `t` directly from per-arm statistics using the
    /// closed-form posterior.
    pub fn from_stats(
        sources: Vec<SourcePrior>,
        stats: Vec<ArmStats>,
        t: u64,
    ) -> Result<Self, BeliefError> {
        let mut bank = Self::new(sources)?;
        if stats.len() != bank.arms() {
            return Err(BeliefError::ArmOutOfRange {
                arm: stats.len(),
                arms: bank.arms(),
            });
        }
        for (d, s) in stats.iter().enumerate() {
            bank.stats[d] = *s;
            for o in 0..bank.sources.len() {
                let (z, n) = batch_posterior(bank.sources[o].zeta0[d], bank.sources[o].nu0[d], *s);
                bank.zeta[o][d] = z;
                bank.nu[o][d] = n;
            }
            let w = weights_from_stats(&bank.sources, d, *s);
            for (o, a) in w.alpha.into_iter().enumerate() {
                bank.alpha[o][d] = a;
            }
            bank.aggregate[d] = bank.aggregate_mean(d);
        }
        bank.t = t;
        Ok(bank)
    }
}
