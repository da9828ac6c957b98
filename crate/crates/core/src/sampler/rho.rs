//! Proposal moments and likelihood kernel for the network dependence path, and the
//! conditional posterior of its innovation variance.

use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::data_model::PriorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalCase {
    Initial,
    First,
    Interior,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoProposalMoments {
    pub mean: f64,
    pub variance: f64,
    pub case: ProposalCase,
}

/// Proposal for `rho_t` given the working path, where entries before `t` already hold
/// this sweep's values and entries after `t` the previous sweep's.
///
/// * `t = 0`: `S_0 = s0 s / (s0 + s)`, mean `S_0 (mu0 / s0 + rho_1 / s)` (a Gibbs draw).
/// * `0 < t < T`: mean `(rho_{t-1} + rho_{t+1}) / 2`, variance `s / 2`.
/// * `t = T`: mean `rho_{T-1}`, variance `s`.
///
/// With `s = varsigma^2` and `s0 = varsigma_0^2`. Each proposal is the exact conditional
/// of `rho_t` under the random-walk prior, so the acceptance ratio reduces to the
/// likelihood ratio.
pub fn rho_proposal(
    t: usize,
    rho_path: &[f64],
    varsigma_sq: f64,
    prior: &PriorSpec,
) -> Result<RhoProposalMoments, SamplerError> {
    let t_max = rho_path.len().saturating_sub(1);
    if t > t_max || t_max == 0 {
        return Err(SamplerError::ProposalIndex { t, t_max });
    }
    let s = varsigma_sq;
    Ok(if t == 0 {
        let s0 = prior.varsigma0_sq;
        let var = s0 * s / (s0 + s);
        RhoProposalMoments {
            mean: var * (prior.mu0 / s0 + rho_path[1] / s),
            variance: var,
            case: ProposalCase::Initial,
        }
    } else if t == t_max {
        RhoProposalMoments {
            mean: rho_path[t - 1],
            variance: s,
            case: ProposalCase::Terminal,
        }
    } else {
        RhoProposalMoments {
            mean: 0.5 * (rho_path[t - 1] + rho_path[t + 1]),
            variance: 0.5 * s,
            case: if t == 1 {
                ProposalCase::First
            } else {
                ProposalCase::Interior
            },
        }
    })
}

/// Sufficient statistics of the quadratic part of the log-likelihood at each event:
/// `sum_i (r_it - rho l_it)^2 / sigma_i^2 = a_t - 2 rho b_t + rho^2 c_t`, with `r` the
/// residual net of the network term and `l` the network lag.
#[derive(Debug, Clone, Default)]
pub struct QuadStats {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl QuadStats {
    pub fn quad(&self, t: usize, rho: f64) -> f64 {
        self.a[t] - 2.0 * rho * self.b[t] + rho * rho * self.c[t]
    }
}

/// Shape and rate of `varsigma^2 | rho_0..rho_T`.
pub fn varsigma_posterior(rho_path: &[f64], prior: &PriorSpec) -> (f64, f64) {
    let t = (rho_path.len() - 1) as f64;
    let ss: f64 = rho_path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    (prior.c_varsigma + 0.5 * t, prior.d_varsigma + 0.5 * ss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_midpoint() {
        let p = PriorSpec::default();
        let m = rho_proposal(2, &[0.0, 0.1, 0.6, 0.8, 0.0], 0.02, &p).unwrap();
        assert!((m.mean - 0.45).abs() < 1e-12);
        let m = rho_proposal(3, &[0.0, 0.1, 0.6, 0.5, 0.8], 0.02, &p).unwrap();
        assert_eq!(m.case, ProposalCase::Interior);
        assert!((m.mean - 0.7).abs() < 1e-12);
        assert!((m.variance - 0.01).abs() < 1e-15);
    }

    #[test]
    fn terminal_copies_forward() {
        let m = rho_proposal(3, &[0.0, 0.2, 0.5, 0.9], 0.04, &PriorSpec::default()).unwrap();
        assert_eq!(m.case, ProposalCase::Terminal);
        assert_eq!((m.mean, m.variance), (0.5, 0.04));
    }

    #[test]
    fn initial_precision_weighted() {
        let m = rho_proposal(0, &[0.0, 0.6, 0.0], 0.02, &PriorSpec::default()).unwrap();
        assert_eq!(m.case, ProposalCase::Initial);
        assert!((m.variance - 1.0 / 60.0).abs() < 1e-15);
        assert!((m.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn first_uses_fresh_initial_value() {
        let m = rho_proposal(1, &[0.3, 9.0, 0.5, 0.0], 0.02, &PriorSpec::default()).unwrap();
        assert_eq!(m.case, ProposalCase::First);
        assert!((m.mean - 0.4).abs() < 1e-15);
        assert!((m.variance - 0.01).abs() < 1e-15);
    }

    #[test]
    fn out_of_range() {
        assert!(rho_proposal(4, &[0.0; 4], 0.1, &PriorSpec::default()).is_err());
    }

    #[test]
    fn varsigma_rate_arithmetic() {
        let p = PriorSpec::default();
        let (shape, rate) = varsigma_posterior(&[0.0, 0.1, 0.2, 0.3, 0.4], &p);
        assert_eq!(shape, p.c_varsigma + 2.0);
        assert!((rate - (p.d_varsigma + 0.02)).abs() < 1e-15);
        let (_, rate) = varsigma_posterior(&[0.5; 6], &p);
        assert_eq!(rate, p.d_varsigma);
    }
}
