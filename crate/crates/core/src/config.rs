//! Experiment configuration document.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "environment": { "theta": [1.0, 1.3], "sigma": [1.0, 1.0], "family": "gaussian" },
//!   "sources": [ { "zeta0": [0.0, 0.0], "nu0": [1.0, 1.0] } ],
//!   "policy": { "family": "epsilon-greedy", "epsilon": 0.25 },
//!   "stopping": { "burn_in": 100, "horizon": 1000, "beta": 0.01 },
//!   "payoff": { "discount": 0.994, "cost": 1.15 }
//! }
//! ```
//!
//! `environment` may be omitted for live sessions, where outcomes come from
//! outside. `payoff.cost` sets both the per-stage experiment cost and the
//! per-stage deployment cost; `cost_experiment` / `cost_deploy` set them
//! separately.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::belief::SourcePrior;
use crate::policy::{PolicyError, PolicyFamily, PolicySpec};
use crate::stopping::{StoppingError, StoppingSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

/// Every problem found in a config, each tied to the field it concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigError {
    pub issues: Vec<FieldIssue>,
}

impl ConfigError {
    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            issues: vec![FieldIssue {
                field: field.into(),
                message: message.into(),
            }],
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config:")?;
        for issue in &self.issues {
            write!(f, " {}: {};", issue.field, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeFamily {
    #[default]
    Gaussian,
    /// `theta + sigma·sqrt(3)·U(−1, 1)`: same mean and variance, bounded support.
    BoundedUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub theta: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub family: OutcomeFamily,
}

impl Environment {
    pub fn gaussian(theta: Vec<f64>, sigma: Vec<f64>) -> Self {
        Self {
            theta,
            sigma,
            family: OutcomeFamily::Gaussian,
        }
    }

    pub fn best_value(&self) -> f64 {
        self.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffSpec {
    pub discount: f64,
    pub cost_experiment: f64,
    pub cost_deploy: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoffDoc {
    discount: f64,
    #[serde(default)]
    cost: Option<f64>,
    #[serde(default)]
    cost_experiment: Option<f64>,
    #[serde(default)]
    cost_deploy: Option<f64>,
}

impl<'de> Deserialize<'de> for PayoffSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let doc = PayoffDoc::deserialize(de)?;
        let shared = doc.cost.unwrap_or(0.0);
        Ok(PayoffSpec {
            discount: doc.discount,
            cost_experiment: doc.cost_experiment.unwrap_or(shared),
            cost_deploy: doc.cost_deploy.unwrap_or(shared),
        })
    }
}

impl PayoffSpec {
    pub fn new(discount: f64, cost: f64) -> Self {
        Self {
            discount,
            cost_experiment: cost,
            cost_deploy: cost,
        }
    }
}

fn default_snapshot_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    pub sources: Vec<SourcePrior>,
    pub policy: PolicySpec,
    pub stopping: StoppingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffSpec>,
    /// Keep a belief snapshot every this many stages.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { String::new() } else { path };
            ConfigError::single(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Validates an already-typed value.
    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        Self::from_json(&value.to_string())
    }

    pub fn arms(&self) -> usize {
        self.sources.first().map_or(0, |s| s.arms())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut push = |field: String, message: String| issues.push(FieldIssue { field, message });

        let arms = self.arms();
        if self.sources.is_empty() {
            push("sources".into(), "at least one source is required".into());
        }
        for (o, s) in self.sources.iter().enumerate() {
            if s.zeta0.len() != arms {
                push(
                    format!("sources[{o}].zeta0"),
                    format!("expected {arms} arms, got {}", s.zeta0.len()),
                );
            }
            if s.nu0.len() != arms {
                push(
                    format!("sources[{o}].nu0"),
                    format!("expected {arms} arms, got {}", s.nu0.len()),
                );
            }
            for (d, z) in s.zeta0.iter().enumerate() {
                if !z.is_finite() {
                    push(format!("sources[{o}].zeta0[{d}]"), "must be finite".into());
                }
            }
            for (d, n) in s.nu0.iter().enumerate() {
                if !(n.is_finite() && *n > 0.0) {
                    push(
                        format!("sources[{o}].nu0[{d}]"),
                        "must be positive and finite".into(),
                    );
                }
            }
        }
        if arms == 0 && !self.sources.is_empty() {
            push("sources[0].zeta0".into(), "at least one arm is required".into());
        }

        if let Some(env) = &self.environment {
            if env.theta.len() != arms {
                push(
                    "environment.theta".into(),
                    format!("expected {arms} arms, got {}", env.theta.len()),
                );
            }
            if env.sigma.len() != env.theta.len() {
                push(
                    "environment.sigma".into(),
                    format!("expected {} entries, got {}", env.theta.len(), env.sigma.len()),
                );
            }
            for (d, th) in env.theta.iter().enumerate() {
                if !th.is_finite() {
                    push(format!("environment.theta[{d}]"), "must be finite".into());
                }
            }
            for (d, s) in env.sigma.iter().enumerate() {
                if !(s.is_finite() && *s >= 0.0) {
                    push(
                        format!("environment.sigma[{d}]"),
                        "must be nonnegative and finite".into(),
                    );
                }
            }
        }

        if arms > 0 {
            if let Err(e) = self.policy.validate(arms) {
                let field = match e {
                    PolicyError::EpsilonOutOfRange { .. } => "policy.epsilon",
                    PolicyError::InvalidH(_) | PolicyError::MissingH => "policy.h",
                    PolicyError::ZeroDraws => "policy.thompson_draws",
                    _ => "policy",
                };
                push(field.into(), e.to_string());
            }
        }
        if self.policy.family == PolicyFamily::EpsilonGreedy && self.policy.h.is_some() {
            push("policy.h".into(), "not used by epsilon-greedy".into());
        }

        if let Err(e) = self.stopping.validate() {
            let message = match e {
                StoppingError::InvalidSpec(m) => m,
                other => other.to_string(),
            };
            push("stopping".into(), message);
        } else if self.stopping.enabled && arms == 1 {
            push("stopping.enabled".into(), "stopping needs at least two arms".into());
        }

        if let Some(p) = &self.payoff {
            if !(p.discount > 0.0 && p.discount < 1.0) {
                push("payoff.discount".into(), format!("{} outside (0, 1)", p.discount));
            }
            if !p.cost_experiment.is_finite() {
                push("payoff.cost_experiment".into(), "must be finite".into());
            }
            if !p.cost_deploy.is_finite() {
                push("payoff.cost_deploy".into(), "must be finite".into());
            }
        }
        if self.snapshot_every == 0 {
            push("snapshot_every".into(), "must be at least 1".into());
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }
}
