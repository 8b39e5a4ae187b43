//! External-validity diagnostics for the Gaussian model.
//!
//! With unit outcome variance, `KL(N(theta,1) || N(zeta,1)) = (theta - zeta)^2 / 2`.
//! A source's external-invalidity index is the smallest such divergence over
//! the parameters its prior puts mass on, so it is zero for full-line Gaussian
//! priors and only informative for restricted supports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::SourcePrior;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidityError {
    #[error("source {source_index}, arm {arm}: empty support interval [{lo}, {hi}]")]
    EmptyInterval {
        source_index: usize,
        arm: usize,
        lo: f64,
        hi: f64,
    },
    #[error("truth has {got} arms, sources have {expected}")]
    ArmMismatch { expected: usize, got: usize },
    #[error("truth entry {0} is not finite")]
    NonFiniteTruth(f64),
    #[error("{sources} sources but {supports} support restrictions")]
    SupportCount { sources: usize, supports: usize },
}

/// Where a source's prior puts mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Support {
    /// Full-support Gaussian prior.
    FullLine,
    /// Dogmatic prior concentrated at `zeta0`.
    PointMass,
    /// Per-arm closed intervals.
    Interval { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalValidityReport {
    /// `kl[o][d]` between the truth and the source's prior centre.
    pub kl: Vec<Vec<f64>>,
    /// `u[o][d]`, the external-invalidity index.
    pub u: Vec<Vec<f64>>,
    /// Sources ordered by total `u` over arms, ties by index.
    pub ranking: Vec<usize>,
}

impl ExternalValidityReport {
    /// Sources ordered by `u` for a single arm.
    pub fn ranking_for_arm(&self, arm: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.u.len()).collect();
        order.sort_by(|&a, &b| self.u[a][arm].total_cmp(&self.u[b][arm]).then(a.cmp(&b)));
        order
    }
}

fn half_sq(x: f64) -> f64 {
    0.5 * x * x
}

pub fn external_validity(
    sources: &[SourcePrior],
    supports: &[Support],
    truth: &[f64],
) -> Result<ExternalValidityReport, ValidityError> {
    if sources.len() != supports.len() {
        return Err(ValidityError::SupportCount {
            sources: sources.len(),
            supports: supports.len(),
        });
    }
    if let Some(x) = truth.iter().find(|x| !x.is_finite()) {
        return Err(ValidityError::NonFiniteTruth(*x));
    }
    let mut kl = Vec::with_capacity(sources.len());
    let mut u = Vec::with_capacity(sources.len());
    for (o, (src, support)) in sources.iter().zip(supports).enumerate() {
        if src.arms() != truth.len() {
            return Err(ValidityError::ArmMismatch {
                expected: src.arms(),
                got: truth.len(),
            });
        }
        let kl_row: Vec<f64> = truth
            .iter()
            .zip(&src.zeta0)
            .map(|(th, z)| half_sq(th - z))
            .collect();
        let u_row = match support {
            Support::FullLine => vec![0.0; truth.len()],
            Support::PointMass => kl_row.clone(),
            Support::Interval { lo, hi } => {
                if lo.len() != truth.len() || hi.len() != truth.len() {
                    return Err(ValidityError::ArmMismatch {
                        expected: truth.len(),
                        got: lo.len().min(hi.len()),
                    });
                }
                let mut row = Vec::with_capacity(truth.len());
                for d in 0..truth.len() {
                    if !(lo[d] <= hi[d]) {
                        return Err(ValidityError::EmptyInterval {
                            source_index: o,
                            arm: d,
                            lo: lo[d],
                            hi: hi[d],
                        });
                    }
                    let gap = (lo[d] - truth[d]).max(truth[d] - hi[d]).max(0.0);
                    row.push(half_sq(gap));
                }
                row
            }
        };
        kl.push(kl_row);
        u.push(u_row);
    }
    let totals: Vec<f64> = u.iter().map(|row| row.iter().sum()).collect();
    let mut ranking: Vec<usize> = (0..sources.len()).collect();
    ranking.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(a.cmp(&b)));
    Ok(ExternalValidityReport { kl, u, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_at_truth_is_valid() {
        let s = vec![SourcePrior::new(vec![1.0, 1.3], vec![1.0, 1.0])];
        let r = external_validity(&s, &[Support::PointMass], &[1.0, 1.3]).unwrap();
        assert_eq!(r.u[0], vec![0.0, 0.0]);
    }

    #[test]
    fn point_mass_off_truth() {
        let s = vec![SourcePrior::new(vec![2.0], vec![1.0])];
        let r = external_validity(&s, &[Support::PointMass], &[1.0]).unwrap();
        assert_eq!(r.u[0][0], 0.5);
        assert_eq!(r.kl[0][0], 0.5);
    }

    #[test]
    fn full_line_is_always_valid() {
        let s = vec![SourcePrior::new(vec![40.0], vec![250.0])];
        let r = external_validity(&s, &[Support::FullLine], &[1.0]).unwrap();
        assert_eq!(r.u[0][0], 0.0);
        assert!(r.kl[0][0] > 700.0);
    }

    #[test]
    fn interval_distance_and_ranking() {
        let s = vec![
            SourcePrior::new(vec![0.0], vec![1.0]),
            SourcePrior::new(vec![0.0], vec![1.0]),
            SourcePrior::new(vec![0.0], vec![1.0]),
        ];
        let sup = vec![
            Support::Interval {
                lo: vec![3.0],
                hi: vec![4.0],
            },
            Support::Interval {
                lo: vec![-1.0],
                hi: vec![0.5],
            },
            Support::FullLine,
        ];
        let r = external_validity(&s, &sup, &[1.0]).unwrap();
        assert_eq!(r.u[0][0], 2.0);
        assert_eq!(r.u[1][0], 0.125);
        assert_eq!(r.ranking, vec![2, 1, 0]);
        assert_eq!(r.ranking_for_arm(0), vec![2, 1, 0]);
    }

    #[test]
    fn empty_interval_rejected() {
        let s = vec![SourcePrior::new(vec![0.0], vec![1.0])];
        let sup = vec![Support::Interval {
            lo: vec![2.0],
            hi: vec![1.0],
        }];
        assert!(matches!(
            external_validity(&s, &sup, &[0.0]),
            Err(ValidityError::EmptyInterval { .. })
        ));
    }
}
