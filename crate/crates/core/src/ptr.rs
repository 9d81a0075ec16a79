//! Propose-Test-Release with a Laplace-noised safety-margin test and
//! Gaussian release, plus an exact-density Monte-Carlo audit of its Rényi
//! moments.
//!
//! The mechanism computes the safety margin `Δ` (edits needed before the
//! robust statistic's local sensitivity exceeds `tau`), releases
//! `Δ̂ = Δ + Lap(0, b)`, and then
//!
//! * if `Δ̂ <= B = ln(1 / (2 delta0)) b`: releases `f1(S) + N(0, sigma1^2 I)`,
//! * otherwise: releases `f2(S) + N(0, sigma2^2 I)`.
//!
//! `Δ̂` is always part of the output.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PtrError, Result};
use crate::noise::{sample_gaussian_vec, sample_laplace, PrivRng};

/// Noise and threshold parameters of one PTR invocation.
///
/// All scales are in the units of the quantities they perturb; the analytic
/// bounds expect a configuration normalized to unit global sensitivity
/// (see [`PtrConfig::normalized`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtrConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub tau: f64,
    pub b: f64,
    pub delta0: f64,
}

impl PtrConfig {
    pub fn new(sigma1: f64, sigma2: f64, tau: f64, b: f64, delta0: f64) -> Result<Self> {
        let config = Self {
            sigma1,
            sigma2,
            tau,
            b,
            delta0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("tau", self.tau),
            ("b", self.b),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PtrError::param(name, format!("must be positive and finite, got {value}")));
            }
        }
        // equality is allowed: sigma1 = sigma2 is the tau = GS corner
        if self.sigma1 < self.sigma2 {
            return Err(PtrError::param(
                "sigma1",
                format!("must be at least sigma2 ({} < {})", self.sigma1, self.sigma2),
            ));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 0.5) {
            return Err(PtrError::param(
                "delta0",
                format!("must lie in (0, 1/2), got {}", self.delta0),
            ));
        }
        Ok(())
    }

    /// Test threshold `B = ln(1 / (2 delta0)) b`, so that `Pr[Lap(0, b) > B] = delta0`.
    pub fn threshold(&self) -> f64 {
        (1.0 / (2.0 * self.delta0)).ln() * self.b
    }

    /// Rescales the release noise and `tau` to unit global sensitivity.
    /// `b` is untouched: the safety margin always has sensitivity 1.
    pub fn normalized(&self, global_sensitivity: f64) -> Result<Self> {
        if !(global_sensitivity > 0.0) {
            return Err(PtrError::param(
                "global_sensitivity",
                format!("must be positive, got {global_sensitivity}"),
            ));
        }
        Self::new(
            self.sigma1 / global_sensitivity,
            self.sigma2 / global_sensitivity,
            self.tau / global_sensitivity,
            self.b,
            self.delta0,
        )
    }

    /// Checks `sigma1 = sigma2 / tau` (relative tolerance 1e-9), the relation the
    /// unit-sensitivity bounds assume.
    pub fn check_scale_relation(&self) -> Result<()> {
        let implied = self.sigma2 / self.tau;
        if (implied - self.sigma1).abs() > 1e-9 * self.sigma1.max(1.0) {
            return Err(PtrError::Config(format!(
                "expected sigma1 = sigma2 / tau, got sigma1 = {} and sigma2 / tau = {implied}",
                self.sigma1
            )));
        }
        Ok(())
    }
}

/// Number of edits before local sensitivity exceeds the proposal; may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SafetyMargin {
    Finite(u64),
    Infinite,
}

impl SafetyMargin {
    pub fn value(self) -> f64 {
        match self {
            SafetyMargin::Finite(r) => r as f64,
            SafetyMargin::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, SafetyMargin::Infinite)
    }
}

impl std::fmt::Display for SafetyMargin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SafetyMargin::Finite(r) => write!(f, "{r}"),
            SafetyMargin::Infinite => f.write_str("inf"),
        }
    }
}

/// The target function, its robust surrogate, and the safety margin of the
/// surrogate. `target` and `robust` must return vectors of equal length, and
/// `safety_margin` must change by at most one under a single add/remove edit.
pub trait SensitivityOracle<T>: Sync {
    fn target(&self, data: &[T]) -> Vec<f64>;
    fn robust(&self, data: &[T]) -> Vec<f64>;
    fn safety_margin(&self, data: &[T], tau: f64) -> SafetyMargin;
}

/// Which release the test selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `Δ̂ <= B`: target function with the large noise.
    LargeNoise,
    /// `Δ̂ > B`: robust statistic with the small noise.
    SmallNoise,
}

impl Branch {
    pub fn from_test(delta_hat: f64, threshold: f64) -> Self {
        if delta_hat <= threshold {
            Branch::LargeNoise
        } else {
            Branch::SmallNoise
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtrOutcome {
    pub delta_hat: f64,
    pub branch: Branch,
    pub release: Vec<f64>,
}

/// Runs one PTR invocation. Exactly one Laplace draw decides the branch;
/// Gaussian draws follow it.
pub fn run_ptr<T, O, R>(dataset: &[T], config: &PtrConfig, oracle: &O, rng: &mut R) -> Result<PtrOutcome>
where
    O: SensitivityOracle<T> + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let margin = oracle.safety_margin(dataset, config.tau);
    let noise = sample_laplace(0.0, config.b, rng)?;
    let delta_hat = margin.value() + noise;
    let branch = Branch::from_test(delta_hat, config.threshold());
    let release = match branch {
        Branch::LargeNoise => sample_gaussian_vec(&oracle.target(dataset), config.sigma1, rng)?,
        Branch::SmallNoise => sample_gaussian_vec(&oracle.robust(dataset), config.sigma2, rng)?,
    };
    Ok(PtrOutcome {
        delta_hat,
        branch,
        release,
    })
}

/// Two datasets at add/remove distance at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentPair<T> {
    pub s: Vec<T>,
    pub s_prime: Vec<T>,
}

impl<T: PartialEq + Clone> AdjacentPair<T> {
    /// Accepts pairs at distance one, and identical pairs (distance zero) for
    /// null audits.
    pub fn new(s: Vec<T>, s_prime: Vec<T>) -> Result<Self> {
        let (small, large) = if s.len() <= s_prime.len() {
            (&s, &s_prime)
        } else {
            (&s_prime, &s)
        };
        let ok = match large.len() - small.len() {
            0 => is_permutation(small, large),
            1 => is_sub_multiset(small, large),
            _ => false,
        };
        if !ok {
            return Err(PtrError::param("pair", "datasets are not adjacent"));
        }
        Ok(Self { s, s_prime })
    }
}

fn is_sub_multiset<T: PartialEq>(small: &[T], large: &[T]) -> bool {
    let mut used = vec![false; large.len()];
    small.iter().all(|x| {
        if let Some(i) = (0..large.len()).find(|&i| !used[i] && large[i] == *x) {
            used[i] = true;
            true
        } else {
            false
        }
    })
}

fn is_permutation<T: PartialEq>(a: &[T], b: &[T]) -> bool {
    a.len() == b.len() && is_sub_multiset(a, b)
}

/// Monte-Carlo estimate of `E_{o ~ M(S')}[(mu_S(o) / mu_S'(o))^alpha]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub const MIN_AUDIT_SAMPLES: usize = 100_000;
const AUDIT_CHUNKS: usize = 64;

/// Per-dataset quantities that fully determine PTR's scalar output law.
#[derive(Debug, Clone, Copy)]
struct ScalarLaw {
    margin: f64,
    target: f64,
    robust: f64,
}

impl ScalarLaw {
    fn of<T, O: SensitivityOracle<T> + ?Sized>(data: &[T], tau: f64, oracle: &O) -> Result<Self> {
        let target = oracle.target(data);
        let robust = oracle.robust(data);
        if target.len() != 1 || robust.len() != 1 {
            return Err(PtrError::UnsupportedAudit(format!(
                "audits require scalar releases, got dimensions {} and {}",
                target.len(),
                robust.len()
            )));
        }
        Ok(Self {
            margin: oracle.safety_margin(data, tau).value(),
            target: target[0],
            robust: robust[0],
        })
    }

    /// Log density of the release conditioned on the branch, up to the
    /// normalizing constant shared by both datasets.
    fn log_release_density(&self, t: f64, branch: Branch, config: &PtrConfig) -> f64 {
        let (center, sigma) = match branch {
            Branch::LargeNoise => (self.target, config.sigma1),
            Branch::SmallNoise => (self.robust, config.sigma2),
        };
        -(t - center).powi(2) / (2.0 * sigma * sigma)
    }
}

/// Estimates the order-`alpha` Rényi moment of PTR's joint output
/// `(Δ̂, release)` between `pair.s` and `pair.s_prime`, sampling from
/// `M(S')` and evaluating the exact per-branch densities.
pub fn empirical_renyi_moment<T, O>(
    pair: &AdjacentPair<T>,
    config: &PtrConfig,
    oracle: &O,
    alpha: f64,
    n_samples: usize,
    rng: &mut PrivRng,
) -> Result<MomentEstimate>
where
    T: Sync,
    O: SensitivityOracle<T> + ?Sized,
{
    config.validate()?;
    if !(alpha > 1.0) {
        return Err(PtrError::Domain(format!("Rényi order must exceed 1, got {alpha}")));
    }
    if n_samples < MIN_AUDIT_SAMPLES {
        return Err(PtrError::param(
            "n_samples",
            format!("audits need at least {MIN_AUDIT_SAMPLES} samples, got {n_samples}"),
        ));
    }
    let law_s = ScalarLaw::of(&pair.s, config.tau, oracle)?;
    let law_sp = ScalarLaw::of(&pair.s_prime, config.tau, oracle)?;
    if law_s.margin.is_infinite() != law_sp.margin.is_infinite() {
        return Err(PtrError::UnsupportedAudit(
            "one dataset has an infinite safety margin and the other does not".into(),
        ));
    }

    let threshold = config.threshold();
    let seeds: Vec<u64> = (0..AUDIT_CHUNKS).map(|_| rng.random()).collect();
    let per_chunk = n_samples / AUDIT_CHUNKS;
    let remainder = n_samples % AUDIT_CHUNKS;

    let sums: Vec<Result<(f64, f64)>> = seeds
        .par_iter()
        .enumerate()
        .map(|(chunk, &seed)| {
            let mut rng = PrivRng::seed_from_u64(seed);
            let count = per_chunk + usize::from(chunk < remainder);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let s = law_sp.margin + sample_laplace(0.0, config.b, &mut rng)?;
                let branch = Branch::from_test(s, threshold);
                let center = match branch {
                    Branch::LargeNoise => law_sp.target,
                    Branch::SmallNoise => law_sp.robust,
                };
                let sigma = match branch {
                    Branch::LargeNoise => config.sigma1,
                    Branch::SmallNoise => config.sigma2,
                };
                let t = sample_gaussian_vec(&[center], sigma, &mut rng)?[0];
                let log_margin_ratio = if s.is_infinite() {
                    0.0
                } else {
                    ((s - law_sp.margin).abs() - (s - law_s.margin).abs()) / config.b
                };
                let log_ratio = log_margin_ratio + law_s.log_release_density(t, branch, config)
                    - law_sp.log_release_density(t, branch, config);
                let value = (alpha * log_ratio).exp();
                sum += value;
                sum_sq += value * value;
            }
            Ok((sum, sum_sq))
        })
        .collect();

    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for chunk in sums {
        let (s, sq) = chunk?;
        sum += s;
        sum_sq += sq;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let variance = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(MomentEstimate {
        estimate: mean,
        stderr: (variance / n).sqrt(),
        samples: n_samples,
    })
}
