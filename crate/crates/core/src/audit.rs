//! Built-in one-dimensional adjacent pairs on which PTR's empirical Rényi
//! moment is compared with the analytic bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accountant::{f_alpha, ptr_rdp};
use crate::error::{PtrError, Result};
use crate::noise::RngSeed;
use crate::ptr::{empirical_renyi_moment, AdjacentPair, MomentEstimate, PtrConfig};
use crate::trimmed_sum::TrimmedSumOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditScenario {
    /// The same dataset on both sides; the moment is exactly 1.
    Identical,
    /// `tau` equal to the global sensitivity, so the margin is infinite and
    /// PTR reduces to a Gaussian mechanism with `sigma2 = 1` on a sum that
    /// moves by 1.
    GaussianDegenerate,
    /// Trimmed sum with `F = 2` on a batch one edit away from a zero margin;
    /// the neighbour adds a max-norm point.
    WorstCaseTrimmed,
}

impl AuditScenario {
    pub const ALL: [AuditScenario; 3] = [
        AuditScenario::Identical,
        AuditScenario::GaussianDegenerate,
        AuditScenario::WorstCaseTrimmed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditScenario::Identical => "identical",
            AuditScenario::GaussianDegenerate => "gaussian-degenerate",
            AuditScenario::WorstCaseTrimmed => "worst-case-trimmed",
        }
    }

    /// Unit-sensitivity configuration the scenario runs with.
    pub fn config(self) -> PtrConfig {
        let config = match self {
            AuditScenario::GaussianDegenerate => PtrConfig::new(1.0, 1.0, 1.0, 1.0, 0.1),
            _ => PtrConfig::new(8.0, 4.0, 0.5, 2.0, 0.1),
        };
        config.expect("built-in audit configs are valid")
    }

    fn oracle(self) -> TrimmedSumOracle {
        let trim = match self {
            AuditScenario::GaussianDegenerate => 0,
            _ => 2,
        };
        TrimmedSumOracle { clip_bound: 1.0, trim }
    }

    fn pair(self) -> AdjacentPair<Vec<f64>> {
        let batch = |values: &[f64]| values.iter().map(|&v| vec![v]).collect::<Vec<_>>();
        let (s, s_prime) = match self {
            AuditScenario::Identical => {
                let s = batch(&[0.1, 0.1, 0.1, 0.1, 1.0]);
                (s.clone(), s)
            }
            AuditScenario::GaussianDegenerate => (batch(&[0.5]), batch(&[0.5, 1.0])),
            AuditScenario::WorstCaseTrimmed => (batch(&[0.1, 0.1, 0.1, 0.1, 1.0]), batch(&[0.1, 0.1, 0.1, 0.1, 1.0, 1.0])),
        };
        AdjacentPair::new(s, s_prime).expect("built-in audit pairs are adjacent")
    }

    /// Moment bound the estimate is held to. The degenerate scenario uses
    /// the exact Gaussian moment `exp(alpha (alpha - 1) / 2)`; the others use
    /// `f_alpha` of the PTR Rényi bound.
    pub fn analytic_bound(self, alpha: f64) -> Result<f64> {
        match self {
            AuditScenario::GaussianDegenerate => Ok((alpha * (alpha - 1.0) / 2.0).exp()),
            _ => Ok(f_alpha(ptr_rdp(&self.config(), alpha)?, alpha).value()),
        }
    }
}

impl fmt::Display for AuditScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AuditScenario {
    type Err = PtrError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|scenario| scenario.as_str() == s)
            .ok_or_else(|| PtrError::param("scenario", format!("unknown audit scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub scenario: AuditScenario,
    pub alpha: f64,
    pub samples: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub analytic_bound: f64,
    /// `estimate <= analytic_bound (1 + 5 stderr)`.
    pub pass: bool,
}

/// Estimates the moment in both directions of the scenario's pair and
/// reports the larger one.
pub fn run_audit(scenario: AuditScenario, alpha: f64, samples: usize, seed: u64) -> Result<AuditReport> {
    let config = scenario.config();
    let oracle = scenario.oracle();
    let pair = scenario.pair();
    let mut rng = RngSeed(seed).rng();
    let forward = empirical_renyi_moment(&pair, &config, &oracle, alpha, samples, &mut rng)?;
    let worst = if pair.s == pair.s_prime {
        forward
    } else {
        let reversed = AdjacentPair {
            s: pair.s_prime.clone(),
            s_prime: pair.s.clone(),
        };
        let backward = empirical_renyi_moment(&reversed, &config, &oracle, alpha, samples, &mut rng)?;
        larger(forward, backward)
    };
    let analytic_bound = scenario.analytic_bound(alpha)?;
    Ok(AuditReport {
        scenario,
        alpha,
        samples,
        estimate: worst.estimate,
        stderr: worst.stderr,
        analytic_bound,
        pass: worst.estimate <= analytic_bound * (1.0 + 5.0 * worst.stderr),
    })
}

fn larger(a: MomentEstimate, b: MomentEstimate) -> MomentEstimate {
    if b.estimate > a.estimate {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_roundtrip() {
        for scenario in AuditScenario::ALL {
            assert_eq!(scenario.as_str().parse::<AuditScenario>().unwrap(), scenario);
        }
        assert!("nope".parse::<AuditScenario>().is_err());
    }

    #[test]
    fn built_in_configs_satisfy_the_scale_relation() {
        for scenario in AuditScenario::ALL {
            scenario.config().check_scale_relation().unwrap();
            assert!(scenario.analytic_bound(2.0).unwrap() >= 1.0);
        }
    }

    #[test]
    fn identical_scenario_is_exactly_one() {
        let report = run_audit(AuditScenario::Identical, 4.0, 100_000, 1).unwrap();
        assert_eq!(report.estimate, 1.0);
        assert!(report.pass);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(run_audit(AuditScenario::Identical, 2.0, 99_999, 1).is_err());
    }
}
