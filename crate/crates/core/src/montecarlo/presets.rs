//! Built-in sweeps for the standard two-arm study: `theta = (1, 1.3)`,
//! unit-variance Gaussian outcomes, horizon 1000, epsilon-greedy assignment.
//! `epsilon` values are total exploration rates (floor `epsilon / 2`).

use serde::{Deserialize, Serialize};

use super::{MonteCarloError, SweepParam, SweepPoint, SweepSpec};
use crate::belief::SourcePrior;
use crate::config::{Environment, ExperimentConfig, PayoffSpec};
use crate::policy::PolicySpec;
use crate::stopping::StoppingSpec;

pub const THETA: [f64; 2] = [1.0, 1.3];
pub const HORIZON: u64 = 1000;
pub const BURN_IN: u64 = 100;
pub const BETA: f64 = 0.01;
pub const DISCOUNT: f64 = 0.994;
pub const COST: f64 = 1.15;
pub const STUBBORN_BIAS: f64 = 0.3;
pub const CONVICTION: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    Weights,
    Beliefs,
    Concentration,
    Priors,
    Stopping,
    Bias,
    Earnings,
    Payoff,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::Weights,
        Figure::Beliefs,
        Figure::Concentration,
        Figure::Priors,
        Figure::Stopping,
        Figure::Bias,
        Figure::Earnings,
        Figure::Payoff,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Weights => "weights",
            Figure::Beliefs => "beliefs",
            Figure::Concentration => "concentration",
            Figure::Priors => "priors",
            Figure::Stopping => "stopping",
            Figure::Bias => "bias",
            Figure::Earnings => "earnings",
            Figure::Payoff => "payoff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetOptions {
    pub replications: u64,
    pub seed: u64,
    /// Prior shift of the stubborn source in the weights/beliefs/earnings presets.
    pub stubborn_bias: f64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 20_240_101,
            stubborn_bias: STUBBORN_BIAS,
        }
    }
}

fn theta() -> Vec<f64> {
    THETA.to_vec()
}

fn shifted(shift: f64, nu: f64) -> SourcePrior {
    SourcePrior::new(THETA.iter().map(|t| t + shift).collect(), vec![nu; 2])
}

/// The study's environment and policy with the given sources and stopping.
pub fn base(sources: Vec<SourcePrior>, epsilon: f64, stopping: StoppingSpec) -> ExperimentConfig {
    ExperimentConfig {
        seed: 0,
        environment: Some(Environment::gaussian(theta(), vec![1.0, 1.0])),
        sources,
        policy: PolicySpec::epsilon_greedy(epsilon / 2.0),
        stopping,
        payoff: None,
        snapshot_every: 1,
    }
}

/// Two identical unbiased sources with conviction 1.
pub fn diffuse_sources() -> Vec<SourcePrior> {
    vec![shifted(0.0, 1.0), shifted(0.0, 1.0)]
}

/// Own diffuse unbiased prior plus a conviction-250 source shifted by `shift`.
pub fn confident_pair(shift: f64) -> Vec<SourcePrior> {
    vec![shifted(0.0, 1.0), shifted(shift, CONVICTION)]
}

pub fn calibrated_stopping() -> StoppingSpec {
    StoppingSpec::new(BURN_IN, HORIZON, BETA)
}

/// Prior ranking-reversal model: `zeta0 = (theta(0) + delta, theta(1) − delta)`.
pub fn stubborn_source(delta: f64) -> SourcePrior {
    SourcePrior::new(vec![THETA[0] + delta, THETA[1] - delta], vec![CONVICTION; 2])
}

fn exploration_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| ((lo + step * i as f64) * 1e6).round() / 1e6).collect()
}

fn spec(
    param: &str,
    points: Vec<SweepPoint>,
    opts: PresetOptions,
    series: bool,
    label: &str,
) -> SweepSpec {
    SweepSpec {
        param: param.to_string(),
        points,
        replications: opts.replications,
        seed: opts.seed,
        series,
        threshold: 0.1,
        label: label.to_string(),
    }
}

fn point(value: f64, config: ExperimentConfig) -> SweepPoint {
    SweepPoint { value, config }
}

/// The sweeps behind one figure-equivalent table set.
pub fn figure(which: Figure, opts: PresetOptions) -> Result<Vec<SweepSpec>, MonteCarloError> {
    let no_stop = StoppingSpec::disabled(HORIZON);
    Ok(match which {
        Figure::Weights | Figure::Beliefs => {
            let b = base(confident_pair(0.0), 0.5, no_stop);
            vec![SweepSpec::grid(
                &b,
                SweepParam::Shift,
                &[0.0, opts.stubborn_bias],
                opts.replications,
                opts.seed,
            )?]
        }
        Figure::Concentration => {
            let b = base(diffuse_sources(), 0.5, no_stop);
            vec![SweepSpec::grid(
                &b,
                SweepParam::Epsilon,
                &[0.1, 0.5, 0.9],
                opts.replications,
                opts.seed,
            )?]
        }
        Figure::Priors => {
            let scenarios: [(&str, f64, f64); 5] = [
                ("bias0.3_nu250", 0.3, 250.0),
                ("bias0.3_nu25", 0.3, 25.0),
                ("bias0.1_nu225", 0.1, 225.0),
                ("bias0_nu1", 0.0, 1.0),
                ("bias0_nu250", 0.0, 250.0),
            ];
            scenarios
                .iter()
                .map(|(label, bias, nu)| {
                    let c = base(vec![shifted(*bias, *nu)], 0.5, no_stop.clone());
                    spec("epsilon", vec![point(0.5, c)], opts, true, label)
                })
                .collect()
        }
        Figure::Stopping => {
            let b = base(diffuse_sources(), 0.5, calibrated_stopping());
            vec![SweepSpec::grid(
                &b,
                SweepParam::Epsilon,
                &exploration_grid(0.1, 0.9, 0.1),
                opts.replications,
                opts.seed,
            )?
            .with_series(false)]
        }
        Figure::Bias => {
            let deltas = exploration_grid(0.0, 0.4, 0.05);
            let build = |label: &str, make: &dyn Fn(f64) -> Vec<SourcePrior>| {
                let points = deltas
                    .iter()
                    .map(|d| point(*d, base(make(*d), 0.5, calibrated_stopping())))
                    .collect();
                spec("bias", points, opts, false, label)
            };
            vec![
                build("stubborn", &|d| vec![stubborn_source(d)]),
                build("confident", &|_| vec![shifted(0.0, CONVICTION)]),
                build("combined", &|d| vec![stubborn_source(d), shifted(0.0, CONVICTION)]),
            ]
        }
        Figure::Earnings => {
            let grid = exploration_grid(0.1, 0.9, 0.1);
            let make = |label: &str, sources: Vec<SourcePrior>| -> Result<SweepSpec, MonteCarloError> {
                Ok(SweepSpec::grid(
                    &base(sources, 0.5, no_stop.clone()),
                    SweepParam::Epsilon,
                    &grid,
                    opts.replications,
                    opts.seed,
                )?
                .with_series(false)
                .with_label(label))
            };
            vec![
                make("diffuse", diffuse_sources())?,
                make("confident", confident_pair(0.0))?,
                make("stubborn", confident_pair(opts.stubborn_bias))?,
            ]
        }
        Figure::Payoff => {
            let mut b = base(diffuse_sources(), 0.5, calibrated_stopping());
            b.payoff = Some(PayoffSpec::new(DISCOUNT, COST));
            vec![SweepSpec::grid(
                &b,
                SweepParam::Epsilon,
                &exploration_grid(0.05, 0.9, 0.05),
                opts.replications,
                opts.seed,
            )?
            .with_series(false)]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(exploration_grid(0.1, 0.9, 0.1).len(), 9);
        let g = exploration_grid(0.05, 0.9, 0.05);
        assert_eq!(g.len(), 18);
        assert_eq!(g[7], 0.4);
    }

    #[test]
    fn every_figure_builds() {
        let opts = PresetOptions {
            replications: 2,
            ..Default::default()
        };
        for f in Figure::ALL {
            let specs = figure(f, opts).unwrap();
            assert!(!specs.is_empty());
            for s in specs {
                for p in &s.points {
                    p.config.validate().unwrap();
                }
            }
            assert_eq!(Figure::parse(f.name()), Some(f));
        }
    }

    #[test]
    fn stopping_preset_floor() {
        let s = &figure(Figure::Stopping, PresetOptions::default()).unwrap()[0];
        assert_eq!(s.param, "epsilon");
        assert!((s.points[8].config.policy.epsilon - 0.45).abs() < 1e-12);
    }
}
