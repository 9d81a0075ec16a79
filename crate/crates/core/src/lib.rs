//! Privacy accounting for Propose-Test-Release (PTR) with a Laplace-noised
//! test and Gaussian release.
//!
//! The crate covers the mechanism itself ([`ptr`]), its Rényi-DP and
//! `(eps, delta)` bounds ([`accountant`]), amplification by Poisson
//! subsampling ([`subsampling`]), trimmed-sum local sensitivity
//! ([`trimmed_sum`]), a small robust DP-SGD simulator ([`sgd`]) and
//! built-in moment audits ([`audit`]). [`figures`] tabulates the accounting
//! routes side by side.

pub mod accountant;
pub mod audit;
pub mod error;
pub mod figures;
pub mod math;
pub mod noise;
pub mod ptr;
pub mod quadrature;
pub mod sgd;
pub mod subsampling;
pub mod trimmed_sum;

pub use accountant::{DpConversion, DpGuarantee, RdpCurve};
pub use error::{PtrError, Result};
pub use noise::{NoiseToSensitivityRatio, PrivRng, RngSeed};
pub use ptr::{AdjacentPair, Branch, PtrConfig, PtrOutcome, SafetyMargin, SensitivityOracle};
