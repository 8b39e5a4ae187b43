//! Running one adaptive experiment.
//!
//! Stage `s` (1-based) assigns the `s`-th unit. With `t = s − 1` observations
//! absorbed so far, the stage proceeds as:
//!
//! 1. if `t ≥ B`, evaluate the stopping rule on the current beliefs; if it
//!    fires the experiment ends with stop time `t`;
//! 2. if `t = T` the experiment ends at the horizon and recommends the arm
//!    with the highest aggregate mean (flagged `forced`);
//! 3. compute the assignment distribution and sample an arm;
//! 4. observe the outcome for that arm, update the beliefs, snapshot.
//!
//! [`Experiment`] exposes steps 1–3 and step 4 separately so that live
//! sessions can supply outcomes from outside.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use crate::belief::{BeliefBank, BeliefError};
use crate::config::{ConfigError, Environment, ExperimentConfig, OutcomeFamily, PayoffSpec};
use crate::policy::{argmax_last, sample_action, ActionDistribution, PolicyError};
use crate::rng::RunStreams;
use crate::stopping::{is_mistake_arm, should_stop, StopDecision, StoppingError, StoppingSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Stopping(#[from] StoppingError),
    #[error("experiment has already halted")]
    Halted,
    #[error("an assignment is pending an outcome")]
    PendingAssignment,
    #[error("no assignment is pending")]
    NoPendingAssignment,
    #[error("outcome script exhausted at stage {0}")]
    ScriptExhausted(u64),
    #[error("discount {0} outside (0, 1)")]
    InvalidDiscount(f64),
}

/// Produces the outcome of the assigned arm at a stage.
pub trait OutcomeSource {
    fn outcome(&mut self, stage: u64, arm: usize) -> Result<f64, EngineError>;
}

/// Draws outcomes from a true environment.
pub struct Simulated<'a, R> {
    pub env: &'a Environment,
    pub rng: R,
}

impl<R: Rng> OutcomeSource for Simulated<'_, R> {
    fn outcome(&mut self, _stage: u64, arm: usize) -> Result<f64, EngineError> {
        Ok(draw_outcome(self.env, arm, &mut self.rng))
    }
}

/// Replays a fixed outcome list in stage order, whatever arm is assigned.
pub struct Scripted {
    outcomes: Vec<f64>,
    next: usize,
}

impl Scripted {
    pub fn new(outcomes: Vec<f64>) -> Self {
        Self { outcomes, next: 0 }
    }
}

impl OutcomeSource for Scripted {
    fn outcome(&mut self, stage: u64, _arm: usize) -> Result<f64, EngineError> {
        let y = self
            .outcomes
            .get(self.next)
            .copied()
            .ok_or(EngineError::ScriptExhausted(stage))?;
        self.next += 1;
        Ok(y)
    }
}

impl<F: FnMut(u64, usize) -> f64> OutcomeSource for F {
    fn outcome(&mut self, stage: u64, arm: usize) -> Result<f64, EngineError> {
        Ok(self(stage, arm))
    }
}

/// One draw of `Y(arm)` from the environment.
pub fn draw_outcome<R: Rng + ?Sized>(env: &Environment, arm: usize, rng: &mut R) -> f64 {
    let (theta, sigma) = (env.theta[arm], env.sigma[arm]);
    match env.family {
        OutcomeFamily::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            theta + sigma * z
        }
        OutcomeFamily::BoundedUniform => {
            let u: f64 = rng.random_range(-1.0..1.0);
            theta + sigma * 3f64.sqrt() * u
        }
    }
}

/// Compact per-arm state after a stage's update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    /// Aggregate posterior means `zeta_alpha[d]`.
    pub aggregate: Vec<f64>,
    /// Per-source posterior means `zeta[o][d]`.
    pub zeta: Vec<Vec<f64>>,
    /// Weights `alpha[o][d]`.
    pub alpha: Vec<Vec<f64>>,
    /// Frequencies of play `N_t(d)/t`.
    pub freq: Vec<f64>,
}

impl BeliefSnapshot {
    pub fn of(bank: &BeliefBank) -> Self {
        let arms = bank.arms();
        let sources = bank.source_count();
        Self {
            aggregate: bank.aggregate().to_vec(),
            zeta: (0..sources)
                .map(|o| (0..arms).map(|d| bank.zeta(o, d)).collect())
                .collect(),
            alpha: (0..sources)
                .map(|o| (0..arms).map(|d| bank.alpha(o, d)).collect())
                .collect(),
            freq: (0..arms).map(|d| bank.frequency(d)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// 1-based stage index.
    pub t: u64,
    pub stop_checked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_decision: Option<StopDecision>,
    /// A stop recommendation was overridden and the stage continued.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub overridden: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_probs: Option<ActionDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_snapshot: Option<BeliefSnapshot>,
}

/// How an experiment ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalDecision {
    /// Observations absorbed when the experiment ended.
    pub stop_time: u64,
    pub chosen_arm: usize,
    /// The horizon was reached without the rule firing.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub log: Vec<StageRecord>,
    pub stop_time: u64,
    pub chosen_arm: usize,
    pub forced: bool,
    /// Whether the recommendation misses the best arm (needs the environment).
    pub mistake: Option<bool>,
    /// Running mean of observed outcomes after each stage.
    pub avg_outcome_path: Vec<f64>,
    pub payoff: Option<f64>,
    pub final_beliefs: BeliefBank,
}

/// What the first half of a stage produced.
#[derive(Debug, Clone, PartialEq)]
pub enum StageStart {
    Halted(FinalDecision),
    Assigned {
        arm: usize,
        probs: ActionDistribution,
        decision: Option<StopDecision>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Pending {
    arm: usize,
    probs: ActionDistribution,
    decision: Option<StopDecision>,
    overridden: bool,
}

/// Stage-by-stage experiment state.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    config: ExperimentConfig,
    stopping: StoppingSpec,
    bank: BeliefBank,
    log: Vec<StageRecord>,
    outcomes: Vec<f64>,
    avg_path: Vec<f64>,
    sum_y: f64,
    pending: Option<Pending>,
    finish: Option<FinalDecision>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let stopping = config.stopping.resolved(config.arms())?;
        let bank = BeliefBank::new(config.sources.clone())?;
        Ok(Self {
            config,
            stopping,
            bank,
            log: Vec::new(),
            outcomes: Vec::new(),
            avg_path: Vec::new(),
            sum_y: 0.0,
            pending: None,
            finish: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Stopping parameters with `gamma_A` resolved.
    pub fn stopping(&self) -> &StoppingSpec {
        &self.stopping
    }

    pub fn bank(&self) -> &BeliefBank {
        &self.bank
    }

    pub fn log(&self) -> &[StageRecord] {
        &self.log
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn finish(&self) -> Option<FinalDecision> {
        self.finish
    }

    pub fn pending_arm(&self) -> Option<usize> {
        self.pending.as_ref().map(|p| p.arm)
    }

    /// Index of the stage about to begin (or pending).
    pub fn stage(&self) -> u64 {
        self.bank.t() + 1
    }

    fn halt(&mut self, decision: Option<StopDecision>, chosen: usize, forced: bool) -> FinalDecision {
        let fin = FinalDecision {
            stop_time: self.bank.t(),
            chosen_arm: chosen,
            forced,
        };
        self.log.push(StageRecord {
            t: self.stage(),
            stop_checked: decision.is_some(),
            stop_decision: decision,
            overridden: false,
            action_probs: None,
            assignment: None,
            outcome: None,
            belief_snapshot: None,
        });
        self.bank.mark_stopped();
        self.finish = Some(fin);
        fin
    }

    /// Steps 1–3 of a stage. With `override_stop` a firing stop rule is
    /// logged but the stage continues; the horizon still ends the run.
    pub fn begin_stage<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        override_stop: bool,
    ) -> Result<StageStart, EngineError> {
        if self.finish.is_some() {
            return Err(EngineError::Halted);
        }
        if self.pending.is_some() {
            return Err(EngineError::PendingAssignment);
        }
        let t = self.bank.t();
        let decision = if self.stopping.enabled && t >= self.stopping.burn_in {
            Some(should_stop(&self.bank, &self.stopping, t)?)
        } else {
            None
        };
        let fires = decision.as_ref().is_some_and(|d| d.stop);
        if fires && !(override_stop && t < self.stopping.horizon) {
            let chosen = decision.as_ref().and_then(|d| d.chosen_arm).unwrap_or(0);
            return Ok(StageStart::Halted(self.halt(decision, chosen, false)));
        }
        if t >= self.stopping.horizon {
            let chosen = argmax_last(self.bank.aggregate());
            return Ok(StageStart::Halted(self.halt(decision, chosen, true)));
        }
        let probs = self.config.policy.distribution(&self.bank, rng)?;
        let arm = sample_action(&probs, rng);
        self.pending = Some(Pending {
            arm,
            probs: probs.clone(),
            decision: decision.clone(),
            overridden: fires,
        });
        Ok(StageStart::Assigned {
            arm,
            probs,
            decision,
        })
    }

    /// Step 4: absorbs the outcome of the pending assignment.
    pub fn complete_stage(&mut self, y: f64) -> Result<&StageRecord, EngineError> {
        let pending = self.pending.as_ref().ok_or(EngineError::NoPendingAssignment)?;
        let arm = pending.arm;
        self.bank.update_posterior(arm, y)?;
        let pending = self.pending.take().expect("checked above");
        let stage = self.stage();
        self.bank.advance_stage();
        self.outcomes.push(y);
        self.sum_y += y;
        self.avg_path.push(self.sum_y / self.outcomes.len() as f64);
        let snapshot = (stage % self.config.snapshot_every == 0
            || stage == self.stopping.horizon)
            .then(|| BeliefSnapshot::of(&self.bank));
        self.log.push(StageRecord {
            t: stage,
            stop_checked: pending.decision.is_some(),
            stop_decision: pending.decision,
            overridden: pending.overridden,
            action_probs: Some(pending.probs),
            assignment: Some(arm),
            outcome: Some(y),
            belief_snapshot: snapshot,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    /// A full stage. Returns the final decision once the run has halted.
    pub fn run_stage<R: Rng + ?Sized, O: OutcomeSource + ?Sized>(
        &mut self,
        rng: &mut R,
        outcomes: &mut O,
    ) -> Result<Option<FinalDecision>, EngineError> {
        match self.begin_stage(rng, false)? {
            StageStart::Halted(fin) => Ok(Some(fin)),
            StageStart::Assigned { arm, .. } => {
                let y = outcomes.outcome(self.stage(), arm)?;
                self.complete_stage(y)?;
                Ok(None)
            }
        }
    }

    /// Discounted value of outcomes observed so far, without continuation.
    pub fn realized_payoff(&self, spec: &PayoffSpec) -> f64 {
        let mut acc = 0.0;
        let mut w = 1.0;
        for y in &self.outcomes {
            w *= spec.discount;
            acc += w * (y - spec.cost_experiment);
        }
        acc
    }

    /// Packages a halted experiment.
    pub fn into_result(self) -> Result<RunResult, EngineError> {
        let fin = self.finish.ok_or(EngineError::NoPendingAssignment)?;
        let env = self.config.environment.as_ref();
        let mistake = env.map(|e| is_mistake_arm(fin.chosen_arm, &e.theta));
        let payoff = match (env, &self.config.payoff) {
            (Some(e), Some(p)) => Some(payoff(&self.outcomes, fin.chosen_arm, e, p)?),
            _ => None,
        };
        Ok(RunResult {
            log: self.log,
            stop_time: fin.stop_time,
            chosen_arm: fin.chosen_arm,
            forced: fin.forced,
            mistake,
            avg_outcome_path: self.avg_path,
            payoff,
            final_beliefs: self.bank,
        })
    }
}

/// `Σ_{s=1}^{T*} β^s (Y_s − c1) + β^{T*+1}/(1 − β) · (theta(chosen) − c2)`,
/// where `T*` is the number of observed outcomes.
pub fn payoff(
    outcomes: &[f64],
    chosen: usize,
    env: &Environment,
    spec: &PayoffSpec,
) -> Result<f64, EngineError> {
    let b = spec.discount;
    if !(b > 0.0 && b < 1.0) {
        return Err(EngineError::InvalidDiscount(b));
    }
    let mut acc = 0.0;
    let mut w = 1.0;
    for y in outcomes {
        w *= b;
        acc += w * (y - spec.cost_experiment);
    }
    let cont = w * b / (1.0 - b) * (env.theta[chosen] - spec.cost_deploy);
    Ok(acc + cont)
}

fn require_environment(config: &ExperimentConfig) -> Result<&Environment, EngineError> {
    config
        .environment
        .as_ref()
        .ok_or_else(|| ConfigError::single("environment", "required to simulate outcomes").into())
}

/// Runs to completion with the streams of replication 0 of `seed`.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunResult, EngineError> {
    run_with_streams(config, RunStreams::single(seed))
}

pub fn run_with_streams(
    config: &ExperimentConfig,
    streams: RunStreams,
) -> Result<RunResult, EngineError> {
    let env = require_environment(config)?.clone();
    let mut source = Simulated {
        env: &env,
        rng: streams.environment(),
    };
    run_with_outcomes(config, streams, &mut source)
}

/// Runs to completion with outcomes from `source` and assignment randomness
/// from `streams`.
pub fn run_with_outcomes<O: OutcomeSource + ?Sized>(
    config: &ExperimentConfig,
    streams: RunStreams,
    source: &mut O,
) -> Result<RunResult, EngineError> {
    let mut exp = Experiment::new(config.clone())?;
    let mut rng = streams.assignment();
    while exp.run_stage(&mut rng, source)?.is_none() {}
    exp.into_result()
}

/// Independent problems, one per covariate value, each with its own config.
/// Context `i` uses replication `i` of `seed`.
pub fn run_contexts(
    configs: &[ExperimentConfig],
    seed: u64,
) -> Result<Vec<RunResult>, EngineError> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| run_with_streams(c, RunStreams::new(seed, i as u64)))
        .collect()
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine<'a> {
    Stage(&'a StageRecord),
    Summary {
        stop_time: u64,
        chosen_arm: usize,
        forced: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        mistake: Option<bool>,
        #[serde(skip_serializing_if = "Option::is_none")]
        payoff: Option<f64>,
        avg_outcome_path: &'a [f64],
        final_beliefs: &'a BeliefBank,
    },
}

impl RunResult {
    /// One JSON object per stage followed by a summary object.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.log {
            serde_json::to_writer(&mut out, &LogLine::Stage(rec))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut out,
            &LogLine::Summary {
                stop_time: self.stop_time,
                chosen_arm: self.chosen_arm,
                forced: self.forced,
                mistake: self.mistake,
                payoff: self.payoff,
                avg_outcome_path: &self.avg_outcome_path,
                final_beliefs: &self.final_beliefs,
            },
        )?;
        out.write_all(b"\n")
    }

    /// Assignment counts per arm.
    pub fn pulls(&self) -> Vec<u64> {
        self.final_beliefs.stats().iter().map(|s| s.n).collect()
    }
}
