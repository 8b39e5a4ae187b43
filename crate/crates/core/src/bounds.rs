//! Finite-sample bound functions.
//!
//! Everything here is a pure function of its inputs. Biases are signed
//! `zeta0 − theta` per source; `t` is the number of absorbed observations.
//!
//! * [`omega`]: one-source bound on `|zeta_t − theta|` when the arm's centred
//!   running sum and its play frequency are within `a` of their targets.
//! * [`weight_envelopes`]: non-random log-weight bounds `ℓ̲ ≤ ℓ ≤ ℓ̄` and the
//!   implied weight bounds `α̲ ≤ α ≤ ᾱ`.
//! * [`gamma_bound`]: the aggregate version of `omega`.
//! * [`eta_star`]: the largest frequency radius that keeps the prior pull
//!   below half the gap.
//! * [`mistake_bound`]: the double sum bounding the probability of
//!   recommending a suboptimal arm. The constants `upsilon` and `C(ε)` come
//!   from the caller; nothing here estimates them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::SourcePrior;
use crate::stopping::{gamma_schedule, StoppingError, StoppingSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("{which} denominator is {value} (must be positive)")]
    NonPositiveDenominator { which: &'static str, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("missing user-supplied constant `{0}`")]
    MissingConstant(&'static str),
    #[error(transparent)]
    Stopping(#[from] StoppingError),
}

fn invalid(msg: impl Into<String>) -> BoundsError {
    BoundsError::InvalidInput(msg.into())
}

/// `Ω(a, b, c, d) = a/(d − a + c) + b·c·(1{b≥0}/(d − a + c) + 1{b<0}/(d + a + c))`.
///
/// In use: `a` is the concentration radius, `b` the signed prior bias, `c`
/// `nu0 / t` and `d` the expected play frequency `e_t` (called `e` below to
/// avoid clashing with the arm index).
pub fn omega(a: f64, b: f64, c: f64, e: f64) -> Result<f64, BoundsError> {
    let lower = e - a + c;
    let upper = e + a + c;
    if !(lower > 0.0) {
        return Err(BoundsError::NonPositiveDenominator {
            which: "d - a + c",
            value: lower,
        });
    }
    if !(upper > 0.0) {
        return Err(BoundsError::NonPositiveDenominator {
            which: "d + a + c",
            value: upper,
        });
    }
    let pull = if b >= 0.0 { b * c / lower } else { b * c / upper };
    Ok(a / lower + pull)
}

/// One source's prior bias and conviction for a single arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceBias {
    /// `zeta0 − theta`.
    pub bias: f64,
    pub nu0: f64,
}

/// Inputs shared by [`weight_envelopes`] and [`gamma_bound`] for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub t: f64,
    /// Concentration radius `γ`.
    pub gamma: f64,
    /// Expected frequency of play `e_t`.
    pub e_t: f64,
    pub sources: Vec<SourceBias>,
    /// Frequency radius for the envelopes; defaults to `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Sample-mean radius for the envelopes; defaults to `gamma / (e_t − eta)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<f64>,
    /// Policy floor. Only checked against `e_t` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl BoundInputs {
    pub fn new(t: f64, gamma: f64, e_t: f64, sources: Vec<SourceBias>) -> Self {
        Self {
            t,
            gamma,
            e_t,
            sources,
            eta: None,
            delta_m: None,
            epsilon: None,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.gamma)
    }

    pub fn delta_m(&self) -> f64 {
        self.delta_m.unwrap_or(self.gamma / (self.e_t - self.eta()))
    }

    /// Same inputs with every bias replaced by its absolute value; the
    /// resulting [`gamma_bound`] bounds `|zeta_alpha − theta|`.
    pub fn absolute(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.sources {
            s.bias = s.bias.abs();
        }
        out
    }

    /// Biases negated; the resulting [`gamma_bound`] bounds `theta − zeta_alpha`.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.sources {
            s.bias = -s.bias;
        }
        out
    }

    fn check(&self) -> Result<(), BoundsError> {
        if self.sources.is_empty() {
            return Err(invalid("at least one source is required"));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(invalid(format!("t must be positive, got {}", self.t)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.e_t > 0.0 && self.e_t <= 1.0) {
            return Err(invalid(format!("e_t must lie in (0, 1], got {}", self.e_t)));
        }
        if let Some(eps) = self.epsilon {
            if self.e_t < eps {
                return Err(invalid(format!("e_t = {} is below the floor {eps}", self.e_t)));
            }
        }
        let eta = self.eta();
        if !(eta >= 0.0) {
            return Err(invalid(format!("eta must be nonnegative, got {eta}")));
        }
        if !(eta < self.e_t) {
            return Err(BoundsError::NonPositiveDenominator {
                which: "e_t - eta",
                value: self.e_t - eta,
            });
        }
        if !(self.delta_m() >= 0.0) {
            return Err(invalid(format!("delta_m must be nonnegative, got {}", self.delta_m())));
        }
        for (o, s) in self.sources.iter().enumerate() {
            if !s.bias.is_finite() || !(s.nu0 > 0.0 && s.nu0.is_finite()) {
                return Err(invalid(format!("source {o}: bias finite and nu0 > 0 required")));
            }
        }
        Ok(())
    }
}

/// Log-weight and weight envelopes for one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub ell_lower: f64,
    pub ell_upper: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
}

/// `log phi(y; 0, s2)` without the `−½ log 2π` shared by every source.
fn kernel(y: f64, s2: f64) -> f64 {
    -0.5 * s2.ln() - 0.5 * y * y / s2
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `(ℓ̲, ℓ̄)` for one source with frequency radius `eta`, mean radius
/// `delta` and expected frequency `pi`.
fn ell_pair(
    s: SourceBias,
    t: f64,
    eta: f64,
    delta: f64,
    pi: f64,
) -> Result<(f64, f64), BoundsError> {
    let var_lo = 1.0 / s.nu0 + 1.0 / (t * (pi + eta));
    let var_hi = 1.0 / s.nu0 + 1.0 / (t * (pi - eta));
    if !(var_lo > 0.0) || !(var_hi > 0.0) {
        return Err(BoundsError::NonPositiveDenominator {
            which: "sigma^2",
            value: var_lo.min(var_hi),
        });
    }
    let b = s.bias.abs();
    let upper = -0.5 * var_lo.ln() - 0.5 * (b * b - 2.0 * delta * b).max(0.0) / var_hi;
    // The true variance lies in [var_lo, var_hi] and the kernel is unimodal in
    // the standard deviation, so the worse endpoint is a valid lower bound.
    let y = delta + b;
    let lower = kernel(y, var_lo).min(kernel(y, var_hi));
    Ok((lower, upper))
}

fn envelopes_raw(
    sources: &[SourceBias],
    t: f64,
    eta: f64,
    delta: f64,
    pi: f64,
) -> Result<Vec<Envelope>, BoundsError> {
    let pairs = sources
        .iter()
        .map(|s| ell_pair(*s, t, eta, delta, pi))
        .collect::<Result<Vec<_>, _>>()?;
    let lowers: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let uppers: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let lse_lower = log_sum_exp(&lowers);
    let lse_upper = log_sum_exp(&uppers);
    Ok(pairs
        .iter()
        .map(|&(lo, hi)| Envelope {
            ell_lower: lo,
            ell_upper: hi,
            alpha_lower: (lo - lse_upper).exp(),
            alpha_upper: (hi - lse_lower).exp(),
        })
        .collect())
}

/// Envelopes for every source. `alpha_upper` is reported unclamped, so with
/// one source the pair brackets the trivial weight 1.
pub fn weight_envelopes(inputs: &BoundInputs) -> Result<Vec<Envelope>, BoundsError> {
    inputs.check()?;
    envelopes_raw(
        &inputs.sources,
        inputs.t,
        inputs.eta(),
        inputs.delta_m(),
        inputs.e_t,
    )
}

/// `Γ = Σ_o min(ᾱ_o, 1)·Ω⁺_o + Σ_o α̲_o·Ω⁻_o` with `Ω_o = Ω(γ, bias_o, nu0_o/t, e_t)`.
///
/// Bounds `zeta_alpha − theta` for signed biases; see
/// [`BoundInputs::absolute`] and [`BoundInputs::negated`] for the other sides.
pub fn gamma_bound(inputs: &BoundInputs) -> Result<f64, BoundsError> {
    let env = weight_envelopes(inputs)?;
    let mut total = 0.0;
    for (s, e) in inputs.sources.iter().zip(&env) {
        let w = omega(inputs.gamma, s.bias, s.nu0 / inputs.t, inputs.e_t)?;
        total += if w >= 0.0 {
            e.alpha_upper.min(1.0) * w
        } else {
            e.alpha_lower * w
        };
    }
    Ok(total)
}

/// Inputs for [`eta_star`] on one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaStarInputs {
    pub t: f64,
    pub gamma_t: f64,
    /// Policy floor `ε`.
    pub epsilon: f64,
    /// Gap `Δ` between the best and second-best arm.
    pub gap: f64,
    /// Whether this arm is the best one; flips the sign of the biases.
    pub best: bool,
    pub sources: Vec<SourceBias>,
}

const X_COARSE: f64 = 1e-2;
const X_FINE: f64 = 1e-4;
const ETA_TOL: f64 = 1e-10;

/// `Σ_o F_o(η)`: for each source the worst-case prior pull over expected
/// frequencies `x ∈ [ε, 1]`, with the weight envelope matching the sign.
pub(crate) fn prior_pull(inp: &EtaStarInputs, eta: f64) -> Result<f64, BoundsError> {
    let sign = if inp.best { -1.0 } else { 1.0 };
    let terms = |x: f64| -> Result<Vec<f64>, BoundsError> {
        let env = envelopes_raw(&inp.sources, inp.t, eta, inp.gamma_t / (x - eta), x)?;
        Ok(inp
            .sources
            .iter()
            .zip(&env)
            .map(|(s, e)| {
                let signed = sign * s.bias;
                let c = s.nu0 / inp.t;
                if signed <= 0.0 {
                    signed * c / (x + eta + c) * e.alpha_lower
                } else {
                    signed * c / (x - eta + c) * e.alpha_upper.min(1.0)
                }
            })
            .collect())
    };

    let lo = inp.epsilon;
    let steps = ((1.0 - lo) / X_COARSE).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| (lo + k as f64 * X_COARSE).min(1.0))
        .collect();
    let values = grid.iter().map(|&x| terms(x)).collect::<Result<Vec<_>, _>>()?;

    let mut total = 0.0;
    for o in 0..inp.sources.len() {
        let mut best = f64::NEG_INFINITY;
        let mut at = 0;
        for (k, v) in values.iter().enumerate() {
            if v[o] > best {
                best = v[o];
                at = k;
            }
        }
        // Fine scan of the neighbourhood of the coarse maximiser.
        let a = grid[at.saturating_sub(1)];
        let b = grid[(at + 1).min(grid.len() - 1)];
        let n = ((b - a) / X_FINE).round() as usize;
        for k in 0..=n {
            let x = (a + k as f64 * X_FINE).min(b);
            best = best.max(terms(x)?[o]);
        }
        total += best;
    }
    Ok(total)
}

/// Largest `η ∈ [0, 0.99ε]` with `Σ_o F_o(η) ≤ Δ/2`.
///
/// Returns `+∞` when every signed bias is nonpositive (the constraint then
/// holds for every `η`), and `0` when even `η = 0` violates it. `Σ_o F_o` is
/// non-decreasing in `η`, so the boundary is found by bisection.
pub fn eta_star(inp: &EtaStarInputs) -> Result<f64, BoundsError> {
    if !(inp.gap > 0.0) {
        return Err(BoundsError::NonPositiveGap(inp.gap));
    }
    if !(inp.epsilon > 0.0 && inp.epsilon <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {}", inp.epsilon)));
    }
    if !(inp.t > 0.0) || !(inp.gamma_t >= 0.0) {
        return Err(invalid("t must be positive and gamma_t nonnegative"));
    }
    if inp.sources.is_empty() {
        return Err(invalid("at least one source is required"));
    }
    let sign = if inp.best { -1.0 } else { 1.0 };
    if inp.sources.iter().all(|s| sign * s.bias <= 0.0) {
        return Ok(f64::INFINITY);
    }
    let half = 0.5 * inp.gap;
    let cap = 0.99 * inp.epsilon;
    if prior_pull(inp, 0.0)? > half {
        return Ok(0.0);
    }
    if prior_pull(inp, cap)? <= half {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > ETA_TOL {
        let mid = 0.5 * (lo + hi);
        if prior_pull(inp, mid)? <= half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `2·exp(−0.5·t·γ_t² / (υ·σ²))`.
pub fn concentration_term(t: f64, gamma_t: f64, upsilon: f64, sigma: f64) -> f64 {
    2.0 * (-0.5 * t * gamma_t * gamma_t / (upsilon * sigma * sigma)).exp()
}

/// `exp(−(t / log t)·η*²·C(ε))`; zero for `η* = ∞`.
pub fn frequency_term(t: f64, eta_star: f64, c_eps: f64) -> f64 {
    if eta_star.is_infinite() {
        return 0.0;
    }
    (-(t / t.ln()) * eta_star * eta_star * c_eps).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeBoundInputs {
    pub theta: Vec<f64>,
    pub sources: Vec<SourcePrior>,
    /// Policy floor `ε`.
    pub epsilon: f64,
    pub stopping: StoppingSpec,
    /// Sub-gaussian variance proxy `υ`.
    #[serde(default)]
    pub upsilon: Option<f64>,
    /// Outcome standard deviation per arm.
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
    /// `C(ε)`.
    #[serde(default)]
    pub c_eps: Option<f64>,
    /// `B(ε)`; enables the burn-in sufficiency check.
    #[serde(default)]
    pub b_eps: Option<f64>,
    /// Gap `Δ`; defaults to best minus second-best `theta`.
    #[serde(default)]
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MistakeBound {
    /// The double sum clamped at 1.
    pub value: f64,
    /// True when the sum reached 1 (evaluation stops there).
    pub saturated: bool,
    /// Some `η*` was 0, which makes the bound trivial.
    pub zero_eta: bool,
    pub warnings: Vec<String>,
}

/// Gap between the best and second-best arm, and the best arm's index.
pub fn gap_of(theta: &[f64]) -> Result<(f64, usize), BoundsError> {
    if theta.len() < 2 {
        return Err(invalid("at least two arms are required"));
    }
    let best = crate::policy::argmax_last(theta);
    let second = theta
        .iter()
        .enumerate()
        .filter(|(d, _)| *d != best)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((theta[best] - second, best))
}

/// `Σ_d Σ_{t=B..T} [2·exp(−0.5·t·γ_t²/(υσ_d²)) + exp(−(t/log t)·η*_d(t)²·C(ε))]`, clamped at 1.
pub fn mistake_bound(inp: &MistakeBoundInputs) -> Result<MistakeBound, BoundsError> {
    let upsilon = inp.upsilon.ok_or(BoundsError::MissingConstant("upsilon"))?;
    let sigma = inp.sigma.as_ref().ok_or(BoundsError::MissingConstant("sigma"))?;
    let c_eps = inp.c_eps.ok_or(BoundsError::MissingConstant("c_eps"))?;
    let arms = inp.theta.len();
    if sigma.len() != arms {
        return Err(invalid(format!("sigma has {} entries for {arms} arms", sigma.len())));
    }
    if inp.sources.iter().any(|s| s.arms() != arms) {
        return Err(invalid("every source must cover every arm"));
    }
    if !(upsilon > 0.0) || sigma.iter().any(|s| !(*s > 0.0)) || !(c_eps > 0.0) {
        return Err(invalid("upsilon, sigma and c_eps must be positive"));
    }
    let (default_gap, best) = gap_of(&inp.theta)?;
    let gap = inp.gap.unwrap_or(default_gap);
    let stopping = inp.stopping.resolved(arms)?;
    let burn_in = stopping.burn_in;
    if burn_in < 2 {
        return Err(invalid("burn_in must be at least 2 (t / log t is undefined at t = 1)"));
    }

    let mut warnings = Vec::new();
    if let Some(b_eps) = inp.b_eps {
        let need = f64::max(2.0, 4.0 * inp.epsilon * b_eps);
        let have = (burn_in as f64).ln();
        if have < need {
            warnings.push(format!(
                "log(burn_in) = {have:.4} is below max(2, 4·epsilon·B(epsilon)) = {need:.4}"
            ));
        }
    }

    let mut total = 0.0;
    let mut zero_eta = false;
    'outer: for d in 0..arms {
        let biases: Vec<SourceBias> = inp
            .sources
            .iter()
            .map(|s| SourceBias {
                bias: s.zeta0[d] - inp.theta[d],
                nu0: s.nu0[d],
            })
            .collect();
        for t in burn_in..=stopping.horizon {
            let tf = t as f64;
            let g = gamma_schedule(&stopping, t)?;
            total += concentration_term(tf, g, upsilon, sigma[d]);
            let eta = eta_star(&EtaStarInputs {
                t: tf,
                gamma_t: g,
                epsilon: inp.epsilon,
                gap,
                best: d == best,
                sources: biases.clone(),
            })?;
            if eta == 0.0 {
                zero_eta = true;
            }
            total += frequency_term(tf, eta, c_eps);
            if total >= 1.0 {
                break 'outer;
            }
        }
    }
    let saturated = total >= 1.0;
    Ok(MistakeBound {
        value: total.min(1.0),
        saturated,
        zero_eta,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(bias: f64, nu0: f64) -> SourceBias {
        SourceBias { bias, nu0 }
    }

    #[test]
    fn omega_examples() {
        assert!((omega(0.0, 2.0, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((omega(0.1, 0.0, 0.5, 0.5).unwrap() - 0.1 / 0.9).abs() < 1e-15);
        assert!(omega(0.6, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn single_source_brackets_one() {
        let inp = BoundInputs::new(200.0, 0.05, 0.4, vec![src(0.2, 10.0)]);
        let e = weight_envelopes(&inp).unwrap()[0];
        assert!(e.alpha_upper >= 1.0 && e.alpha_lower <= 1.0);
        assert!(e.ell_lower <= e.ell_upper);
    }

    #[test]
    fn distant_source_loses_weight() {
        let mut last = f64::INFINITY;
        for b in [1.0, 3.0, 10.0, 30.0] {
            let inp = BoundInputs::new(200.0, 0.05, 0.4, vec![src(0.0, 10.0), src(b, 10.0)]);
            let up = weight_envelopes(&inp).unwrap()[1].alpha_upper;
            assert!(up < last);
            last = up;
        }
        assert!(last < 1e-100);
    }

    #[test]
    fn unbiased_source_at_zero_radius() {
        let inp = BoundInputs::new(100.0, 0.0, 0.5, vec![src(0.0, 3.0)]);
        assert_eq!(gamma_bound(&inp).unwrap(), 0.0);
    }

    #[test]
    fn eta_star_infinite_when_biases_favour_truth() {
        let inp = EtaStarInputs {
            t: 100.0,
            gamma_t: 0.3,
            epsilon: 0.2,
            gap: 0.3,
            best: false,
            sources: vec![src(-0.2, 50.0), src(0.0, 1.0)],
        };
        assert!(eta_star(&inp).unwrap().is_infinite());
        let best = EtaStarInputs {
            best: true,
            sources: vec![src(0.2, 50.0)],
            ..inp
        };
        assert!(eta_star(&best).unwrap().is_infinite());
    }

    #[test]
    fn eta_star_matches_single_source_closed_form() {
        for (t, bias, nu0, eps) in [(200.0, 0.5, 20.0, 0.25), (500.0, 1.0, 30.0, 0.1), (50.0, 0.2, 5.0, 0.3)] {
            let inp = EtaStarInputs {
                t,
                gamma_t: 0.1,
                epsilon: eps,
                gap: 0.3,
                best: false,
                sources: vec![src(bias, nu0)],
            };
            let c = nu0 / t;
            // bias·c/(x − η + c) is largest at x = ε.
            let closed = (eps + c - 2.0 * bias * c / 0.3).clamp(0.0, 0.99 * eps);
            let got = eta_star(&inp).unwrap();
            assert!((got - closed).abs() < 1e-8, "{got} vs {closed}");
        }
    }

    #[test]
    fn mistake_bound_needs_constants() {
        let inp = MistakeBoundInputs {
            theta: vec![1.0, 1.3],
            sources: vec![SourcePrior::new(vec![1.0, 1.3], vec![1.0, 1.0])],
            epsilon: 0.25,
            stopping: StoppingSpec::new(100, 1000, 0.01),
            upsilon: None,
            sigma: Some(vec![1.0, 1.0]),
            c_eps: Some(1.0),
            b_eps: None,
            gap: None,
        };
        assert_eq!(mistake_bound(&inp), Err(BoundsError::MissingConstant("upsilon")));
    }

    #[test]
    fn zero_eta_clamps_to_one() {
        let inp = MistakeBoundInputs {
            theta: vec![1.0, 1.3],
            sources: vec![SourcePrior::new(vec![3.0, 1.3], vec![500.0, 1.0])],
            epsilon: 0.25,
            stopping: StoppingSpec::new(100, 200, 0.01),
            upsilon: Some(1.0),
            sigma: Some(vec![1.0, 1.0]),
            c_eps: Some(1.0),
            b_eps: Some(10.0),
            gap: None,
        };
        let b = mistake_bound(&inp).unwrap();
        assert_eq!(b.value, 1.0);
        assert!(b.zero_eta && b.saturated);
        assert_eq!(b.warnings.len(), 1);
    }

    #[test]
    fn doubling_gamma_scales_concentration_term() {
        let (t, g, u, s) = (300.0, 0.05, 1.5, 0.8);
        let ratio = concentration_term(t, 2.0 * g, u, s) / concentration_term(t, g, u, s);
        let expect = (-1.5 * t * g * g / (u * s * s)).exp();
        assert!((ratio / expect - 1.0).abs() < 1e-12);
    }
}
