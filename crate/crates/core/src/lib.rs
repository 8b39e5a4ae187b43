//! Multi-prior Gaussian bandit experiments.
//!
//! Per-source Gaussian posteriors are combined with model-probability weights
//! ([`belief`]); floored assignment rules act on the combined means
//! ([`policy`]); a threshold rule with calibrated cutoffs decides when to stop
//! ([`stopping`]). [`engine`] runs single experiments, [`montecarlo`] runs
//! replicated sweeps, [`bounds`] evaluates finite-sample envelopes and
//! [`session`] drives live trials stage by stage.

pub mod belief;
pub mod bounds;
pub mod config;
pub mod engine;
pub mod montecarlo;
pub mod policy;
pub mod rng;
pub mod session;
pub mod stopping;
pub mod validity;
