//! Laplace and Gaussian primitives: seeded samplers plus their DP and RDP
//! guarantees expressed through the noise-to-sensitivity ratio.
//!
//! Logarithms are natural throughout. The pure-DP cost of the Laplace
//! mechanism is `1 / b`, and the classic Gaussian bound is
//! `sqrt(2 ln(1.25 / delta)) / sigma`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PtrError, Result};
use crate::math::log_weighted_sum_exp;

/// The RNG used by every sampler in the crate.
pub type PrivRng = ChaCha20Rng;

/// Seed for a reproducible sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> PrivRng {
        ChaCha20Rng::seed_from_u64(self.0)
    }
}

/// Noise scale divided by the sensitivity of the noised quantity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseToSensitivityRatio(f64);

impl NoiseToSensitivityRatio {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && !value.is_nan() {
            Ok(Self(value))
        } else {
            Err(PtrError::param(
                "noise_to_sensitivity",
                format!("must be positive, got {value}"),
            ))
        }
    }

    /// Ratio of `scale` to `sensitivity`.
    pub fn from_scale(scale: f64, sensitivity: f64) -> Result<Self> {
        if !(sensitivity > 0.0) {
            return Err(PtrError::param(
                "sensitivity",
                format!("must be positive, got {sensitivity}"),
            ));
        }
        Self::new(scale / sensitivity)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 1.0 && !alpha.is_nan() {
        Ok(())
    } else {
        Err(PtrError::Domain(format!("Rényi order must exceed 1, got {alpha}")))
    }
}

/// Draws `center + Lap(0, scale)`.
pub fn sample_laplace<R: Rng + ?Sized>(center: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(PtrError::param(
            "scale",
            format!("Laplace scale must be positive, got {scale}"),
        ));
    }
    let magnitude: f64 = Exp1.sample(rng);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    Ok(center + sign * scale * magnitude)
}

/// Draws `center + N(0, sigma^2 I)`.
pub fn sample_gaussian_vec<R: Rng + ?Sized>(
    center: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(PtrError::param(
            "sigma",
            format!("Gaussian scale must be positive, got {sigma}"),
        ));
    }
    Ok(center
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(rng);
            c + sigma * z
        })
        .collect())
}

/// Pure-DP epsilon of the Laplace mechanism: `1 / b_tilde`.
pub fn laplace_pure_dp_eps(b_tilde: NoiseToSensitivityRatio) -> f64 {
    1.0 / b_tilde.get()
}

/// RDP of the Laplace mechanism at order `alpha`:
/// `ln(a/(2a-1) e^{(a-1)/b} + (a-1)/(2a-1) e^{-a/b}) / (a-1)`,
/// evaluated in log space.
pub fn laplace_rdp_eps(b_tilde: NoiseToSensitivityRatio, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let b = b_tilde.get();
    let denom = 2.0 * alpha - 1.0;
    let (w1, x1, w2, x2) = (alpha / denom, (alpha - 1.0) / b, (alpha - 1.0) / denom, -alpha / b);
    let log_moment = if x1.abs().max(x2.abs()) < 1.0 {
        // weights sum to one, so the moment minus one avoids cancellation
        (w1 * x1.exp_m1() + w2 * x2.exp_m1()).ln_1p()
    } else {
        log_weighted_sum_exp(w1, x1, w2, x2)
    };
    Ok((log_moment / (alpha - 1.0)).max(0.0))
}

/// RDP of the Gaussian mechanism: `alpha / (2 sigma_tilde^2)`.
pub fn gaussian_rdp_eps(sigma_tilde: NoiseToSensitivityRatio, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let s = sigma_tilde.get();
    Ok(alpha / (2.0 * s * s))
}

/// Result of the classic Gaussian-mechanism calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicGaussianEps {
    pub eps: f64,
    /// The classic bound is only proven for `eps <= 1`.
    pub within_classic_domain: bool,
}

/// Classic `(eps, delta)` bound of the Gaussian mechanism:
/// `sqrt(2 ln(1.25 / delta)) / sigma_tilde`.
pub fn gaussian_dp_eps(sigma_tilde: NoiseToSensitivityRatio, delta: f64) -> Result<ClassicGaussianEps> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PtrError::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let eps = (2.0 * (1.25 / delta).ln()).sqrt() / sigma_tilde.get();
    Ok(ClassicGaussianEps {
        eps,
        within_classic_domain: eps <= 1.0,
    })
}
