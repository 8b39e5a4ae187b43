//! Replicated experiments over a parameter grid.
//!
//! Every grid point runs replications `0..R` with the streams of
//! [`RunStreams::new(seed, r)`](crate::rng::RunStreams), so points share
//! random numbers replication by replication. Each replication is reduced to a
//! [`ReplicationSummary`] inside the parallel map; aggregates are then folded
//! in replication order, which makes the frame independent of thread count.

mod emit;
pub mod presets;

pub use emit::{emit_results, EmitError};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::engine::{run_with_streams, RunResult};
use crate::rng::RunStreams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("unknown sweep parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{param}` = {value}: {message}")]
    InvalidPoint {
        param: String,
        value: f64,
        message: String,
    },
    #[error("{failed} of {replications} replications failed at {param} = {value}; first: {first}")]
    TooManyFailures {
        param: String,
        value: f64,
        failed: usize,
        replications: u64,
        first: String,
    },
    #[error("concentration threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("frame has no stage series")]
    NoSeries,
}

/// Named transformations of a base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Total exploration rate; the per-arm floor becomes `value / (M+1)`.
    Epsilon,
    /// Per-arm floor, written directly to `policy.epsilon`.
    Floor,
    /// Source 0 prior set to `theta(d) + value` for every arm except the
    /// best, which gets `theta(best) − value`.
    Bias,
    /// Last source's prior set to `theta + value`.
    Shift,
    Discount,
    /// Sets both payoff costs.
    Cost,
    BurnIn,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self, MonteCarloError> {
        Ok(match name {
            "epsilon" => Self::Epsilon,
            "floor" => Self::Floor,
            "bias" => Self::Bias,
            "shift" => Self::Shift,
            "discount" => Self::Discount,
            "cost" => Self::Cost,
            "burn_in" | "burn-in" => Self::BurnIn,
            other => return Err(MonteCarloError::UnknownParam(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Epsilon => "epsilon",
            Self::Floor => "floor",
            Self::Bias => "bias",
            Self::Shift => "shift",
            Self::Discount => "discount",
            Self::Cost => "cost",
            Self::BurnIn => "burn_in",
        }
    }

    /// `base` with this parameter set to `value`, validated.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, MonteCarloError> {
        let invalid = |message: String| MonteCarloError::InvalidPoint {
            param: self.name().to_string(),
            value,
            message,
        };
        let mut c = base.clone();
        let theta = c.environment.as_ref().map(|e| e.theta.clone());
        match self {
            Self::Epsilon => c.policy.epsilon = value / c.arms() as f64,
            Self::Floor => c.policy.epsilon = value,
            Self::Bias => {
                let theta = theta.ok_or_else(|| invalid("needs an environment".into()))?;
                let best = crate::policy::argmax_last(&theta);
                c.sources[0].zeta0 = theta
                    .iter()
                    .enumerate()
                    .map(|(d, th)| if d == best { th - value } else { th + value })
                    .collect();
            }
            Self::Shift => {
                let theta = theta.ok_or_else(|| invalid("needs an environment".into()))?;
                let last = c.sources.len() - 1;
                c.sources[last].zeta0 = theta.iter().map(|th| th + value).collect();
            }
            Self::Discount => {
                let p = c.payoff.as_mut().ok_or_else(|| invalid("needs a payoff section".into()))?;
                p.discount = value;
            }
            Self::Cost => {
                let p = c.payoff.as_mut().ok_or_else(|| invalid("needs a payoff section".into()))?;
                p.cost_experiment = value;
                p.cost_deploy = value;
            }
            Self::BurnIn => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(invalid("burn-in must be a positive integer".into()));
                }
                c.stopping.burn_in = value as u64;
            }
        }
        c.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Name used for the parameter column.
    pub param: String,
    pub points: Vec<SweepPoint>,
    pub replications: u64,
    pub seed: u64,
    /// Keep per-stage series (weights, beliefs, pulls, deviations).
    pub series: bool,
    /// `tau_c` for the exceedance columns.
    pub threshold: f64,
    /// Tag distinguishing several frames written to the same tables.
    #[serde(default)]
    pub label: String,
}

impl SweepSpec {
    pub fn grid(
        base: &ExperimentConfig,
        param: SweepParam,
        values: &[f64],
        replications: u64,
        seed: u64,
    ) -> Result<Self, MonteCarloError> {
        if values.is_empty() {
            return Err(MonteCarloError::EmptyGrid);
        }
        let points = values
            .iter()
            .map(|v| {
                Ok(SweepPoint {
                    value: *v,
                    config: param.apply(base, *v)?,
                })
            })
            .collect::<Result<Vec<_>, MonteCarloError>>()?;
        Ok(Self {
            param: param.name().to_string(),
            points,
            replications,
            seed,
            series: true,
            threshold: 0.1,
            label: String::new(),
        })
    }

    pub fn with_series(mut self, series: bool) -> Self {
        self.series = series;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Per-stage state of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePoint {
    pub t: u64,
    pub alpha: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
    pub pulls: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub stop_time: u64,
    pub forced: bool,
    pub chosen_arm: usize,
    pub mistake: bool,
    pub payoff: Option<f64>,
    /// Mean observed outcome over the realised stages.
    pub avg_outcome: f64,
    pub pulls: Vec<u64>,
    pub series: Vec<StagePoint>,
}

impl ReplicationSummary {
    pub fn from_run(replication: u64, run: &RunResult, series: bool) -> Self {
        let arms = run.final_beliefs.arms();
        let mut stages = Vec::new();
        if series {
            let mut pulls = vec![0u64; arms];
            for rec in &run.log {
                if let Some(a) = rec.assignment {
                    pulls[a] += 1;
                }
                if let Some(s) = &rec.belief_snapshot {
                    stages.push(StagePoint {
                        t: rec.t,
                        alpha: s.alpha.clone(),
                        zeta: s.zeta.clone(),
                        aggregate: s.aggregate.clone(),
                        pulls: pulls.clone(),
                    });
                }
            }
        }
        Self {
            replication,
            stop_time: run.stop_time,
            forced: run.forced,
            chosen_arm: run.chosen_arm,
            mistake: run.mistake.unwrap_or(false),
            payoff: run.payoff,
            avg_outcome: run.avg_outcome_path.last().copied().unwrap_or(0.0),
            pulls: run.pulls(),
            series: stages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplication {
    pub replication: u64,
    pub error: String,
}

/// Cross-replication aggregates at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub t: u64,
    /// Replications still running at this stage.
    pub runs: u64,
    pub alpha_mean: Vec<Vec<f64>>,
    pub alpha_q10: Vec<Vec<f64>>,
    pub alpha_q90: Vec<Vec<f64>>,
    pub zeta_mean: Vec<Vec<f64>>,
    pub aggregate_mean: Vec<f64>,
    pub pulls_mean: Vec<f64>,
    /// `|zeta_alpha(d) − theta(d)|` per arm, sorted ascending.
    pub deviations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub value: f64,
    pub completed: u64,
    pub failures: Vec<FailedReplication>,
    pub stop_time: Estimate,
    pub stopped_share: f64,
    pub mistake: Estimate,
    pub earnings_gap: Estimate,
    pub earnings_gap_q10: f64,
    pub earnings_gap_q90: f64,
    pub payoff: Option<Estimate>,
    pub pulls_mean: Vec<f64>,
    pub stages: Vec<StageMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub spec: SweepSpec,
    pub points: Vec<PointMetrics>,
}

/// Mean and standard error `sd / sqrt(n)` (0 when n < 2).
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Estimate { mean: 0.0, se: 0.0 };
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Estimate { mean, se: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Frequency with binomial standard error `sqrt(p(1−p)/n)`.
pub fn proportion(hits: u64, n: u64) -> Estimate {
    if n == 0 {
        return Estimate { mean: 0.0, se: 0.0 };
    }
    let p = hits as f64 / n as f64;
    Estimate {
        mean: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn aggregate_point(value: f64, theta: &[f64], best: f64, reps: &[ReplicationSummary], failures: Vec<FailedReplication>) -> PointMetrics {
    let n = reps.len() as u64;
    let stop: Vec<f64> = reps.iter().map(|r| r.stop_time as f64).collect();
    let gaps: Vec<f64> = reps.iter().map(|r| r.avg_outcome - best).collect();
    let gaps_sorted = sorted(gaps.clone());
    let payoffs: Option<Vec<f64>> = reps.iter().map(|r| r.payoff).collect();
    let arms = theta.len();
    let pulls_mean = (0..arms)
        .map(|d| reps.iter().map(|r| r.pulls[d] as f64).sum::<f64>() / n.max(1) as f64)
        .collect();
    PointMetrics {
        value,
        completed: n,
        failures,
        stop_time: mean_se(&stop),
        stopped_share: proportion(reps.iter().filter(|r| !r.forced).count() as u64, n).mean,
        mistake: proportion(reps.iter().filter(|r| r.mistake).count() as u64, n),
        earnings_gap: mean_se(&gaps),
        earnings_gap_q10: quantile_sorted(&gaps_sorted, 0.1),
        earnings_gap_q90: quantile_sorted(&gaps_sorted, 0.9),
        payoff: payoffs.filter(|p| !p.is_empty()).map(|p| mean_se(&p)),
        pulls_mean,
        stages: stage_metrics(theta, reps),
    }
}

fn stage_metrics(theta: &[f64], reps: &[ReplicationSummary]) -> Vec<StageMetrics> {
    let mut ts: Vec<u64> = reps.iter().flat_map(|r| r.series.iter().map(|s| s.t)).collect();
    ts.sort_unstable();
    ts.dedup();
    let arms = theta.len();
    let mut cursors = vec![0usize; reps.len()];
    let mut out = Vec::with_capacity(ts.len());
    for t in ts {
        let mut at: Vec<&StagePoint> = Vec::new();
        for (i, r) in reps.iter().enumerate() {
            if let Some(s) = r.series.get(cursors[i]) {
                if s.t == t {
                    at.push(s);
                    cursors[i] += 1;
                }
            }
        }
        let runs = at.len();
        let sources = at.first().map_or(0, |s| s.alpha.len());
        let nf = runs as f64;
        let mut alpha_mean = vec![vec![0.0; arms]; sources];
        let mut alpha_q10 = vec![vec![0.0; arms]; sources];
        let mut alpha_q90 = vec![vec![0.0; arms]; sources];
        let mut zeta_mean = vec![vec![0.0; arms]; sources];
        for o in 0..sources {
            for d in 0..arms {
                let a = sorted(at.iter().map(|s| s.alpha[o][d]).collect());
                alpha_mean[o][d] = at.iter().map(|s| s.alpha[o][d]).sum::<f64>() / nf;
                alpha_q10[o][d] = quantile_sorted(&a, 0.1);
                alpha_q90[o][d] = quantile_sorted(&a, 0.9);
                zeta_mean[o][d] = at.iter().map(|s| s.zeta[o][d]).sum::<f64>() / nf;
            }
        }
        let aggregate_mean = (0..arms)
            .map(|d| at.iter().map(|s| s.aggregate[d]).sum::<f64>() / nf)
            .collect();
        let pulls_mean = (0..arms)
            .map(|d| at.iter().map(|s| s.pulls[d] as f64).sum::<f64>() / nf)
            .collect();
        let deviations = (0..arms)
            .map(|d| sorted(at.iter().map(|s| (s.aggregate[d] - theta[d]).abs()).collect()))
            .collect();
        out.push(StageMetrics {
            t,
            runs: runs as u64,
            alpha_mean,
            alpha_q10,
            alpha_q90,
            zeta_mean,
            aggregate_mean,
            pulls_mean,
            deviations,
        });
    }
    out
}

/// Runs one replication and reduces it.
pub fn run_replication(
    config: &ExperimentConfig,
    seed: u64,
    replication: u64,
    series: bool,
) -> Result<ReplicationSummary, String> {
    run_with_streams(config, RunStreams::new(seed, replication))
        .map(|run| ReplicationSummary::from_run(replication, &run, series))
        .map_err(|e| e.to_string())
}

/// Raw replication summaries for one point, in replication order.
pub fn run_point(
    config: &ExperimentConfig,
    seed: u64,
    replications: u64,
    series: bool,
) -> Vec<Result<ReplicationSummary, String>> {
    let mut config = config.clone();
    if !series {
        config.snapshot_every = u64::MAX;
    }
    (0..replications)
        .into_par_iter()
        .map(|r| run_replication(&config, seed, r, series))
        .collect()
}

pub fn run_sweep(spec: &SweepSpec) -> Result<MetricsFrame, MonteCarloError> {
    if spec.points.is_empty() {
        return Err(MonteCarloError::EmptyGrid);
    }
    if spec.replications == 0 {
        return Err(MonteCarloError::NoReplications);
    }
    let mut points = Vec::with_capacity(spec.points.len());
    for p in &spec.points {
        let env = p.config.environment.as_ref().ok_or_else(|| MonteCarloError::InvalidPoint {
            param: spec.param.clone(),
            value: p.value,
            message: "needs an environment".into(),
        })?;
        let raw = run_point(&p.config, spec.seed, spec.replications, spec.series);
        let mut reps = Vec::with_capacity(raw.len());
        let mut failures = Vec::new();
        for (r, res) in raw.into_iter().enumerate() {
            match res {
                Ok(s) => reps.push(s),
                Err(error) => failures.push(FailedReplication {
                    replication: r as u64,
                    error,
                }),
            }
        }
        if failures.len() as f64 > 0.01 * spec.replications as f64 {
            return Err(MonteCarloError::TooManyFailures {
                param: spec.param.clone(),
                value: p.value,
                failed: failures.len(),
                replications: spec.replications,
                first: failures[0].error.clone(),
            });
        }
        points.push(aggregate_point(p.value, &env.theta, env.best_value(), &reps, failures));
    }
    Ok(MetricsFrame {
        spec: spec.clone(),
        points,
    })
}

/// Exceedance probability and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: u64,
    pub p: f64,
    pub se: f64,
}

/// `P(|zeta_alpha_t(arm) − theta(arm)| > tau)` per stage, for one grid point.
pub fn concentration_curve(
    frame: &MetricsFrame,
    point: usize,
    arm: usize,
    tau: f64,
) -> Result<Vec<CurvePoint>, MonteCarloError> {
    if !(tau > 0.0) {
        return Err(MonteCarloError::BadThreshold(tau));
    }
    let p = &frame.points[point];
    if p.stages.is_empty() {
        return Err(MonteCarloError::NoSeries);
    }
    Ok(p.stages
        .iter()
        .map(|s| {
            let dev = &s.deviations[arm];
            let within = dev.partition_point(|x| *x <= tau);
            let e = proportion((dev.len() - within) as u64, dev.len() as u64);
            CurvePoint {
                t: s.t,
                p: e.mean,
                se: e.se,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::SourcePrior;
    use crate::config::Environment;
    use crate::policy::PolicySpec;
    use crate::stopping::StoppingSpec;

    fn base(horizon: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed: 0,
            environment: Some(Environment::gaussian(vec![1.0, 1.3], vec![1.0, 1.0])),
            sources: vec![SourcePrior::new(vec![1.0, 1.3], vec![1.0, 1.0])],
            policy: PolicySpec::epsilon_greedy(0.25),
            stopping: StoppingSpec::disabled(horizon),
            payoff: None,
            snapshot_every: 1,
        }
    }

    #[test]
    fn single_replication_matches_run() {
        let spec = SweepSpec::grid(&base(50), SweepParam::Epsilon, &[0.5], 1, 8).unwrap();
        let frame = run_sweep(&spec).unwrap();
        let run = crate::engine::run_with_streams(&spec.points[0].config, RunStreams::new(8, 0)).unwrap();
        let p = &frame.points[0];
        assert_eq!(p.stop_time.mean, run.stop_time as f64);
        assert_eq!(p.earnings_gap.mean, run.avg_outcome_path.last().unwrap() - 1.3);
        assert_eq!(p.stages.len(), 50);
        let last = p.stages.last().unwrap();
        assert_eq!(last.alpha_mean[0][0], run.final_beliefs.alpha(0, 0));
        assert_eq!(last.aggregate_mean, run.final_beliefs.aggregate().to_vec());
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(
            SweepSpec::grid(&base(10), SweepParam::Epsilon, &[], 3, 1).unwrap_err(),
            MonteCarloError::EmptyGrid
        );
    }

    #[test]
    fn param_application() {
        let b = base(10);
        assert_eq!(SweepParam::Epsilon.apply(&b, 0.5).unwrap().policy.epsilon, 0.25);
        assert_eq!(SweepParam::Floor.apply(&b, 0.1).unwrap().policy.epsilon, 0.1);
        let c = SweepParam::Bias.apply(&b, 0.2).unwrap();
        assert!((c.sources[0].zeta0[0] - 1.2).abs() < 1e-15);
        assert!((c.sources[0].zeta0[1] - 1.1).abs() < 1e-15);
        assert!(SweepParam::Epsilon.apply(&b, 1.5).is_err());
        assert!(SweepParam::parse("nope").is_err());
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 0.1), 1.4);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
    }

    #[test]
    fn curve_threshold_validation() {
        let spec = SweepSpec::grid(&base(5), SweepParam::Epsilon, &[0.5], 3, 1).unwrap();
        let frame = run_sweep(&spec).unwrap();
        assert!(concentration_curve(&frame, 0, 0, 0.0).is_err());
        let huge = concentration_curve(&frame, 0, 0, 1e9).unwrap();
        assert!(huge.iter().all(|c| c.p == 0.0));
    }
}
