//! Comparison tables between the accounting routes: direct `(eps, delta)`
//! analysis against the Rényi route for one PTR release, the white-box
//! subsampled bound against the generic bounds, and their composition over
//! many steps.
//!
//! All configurations here are at unit global sensitivity, with
//! `sigma2 = sigma1 tau`.

use serde::{Deserialize, Serialize};

use crate::accountant::{default_alpha_grid, ptr_direct_dp, ptr_rdp, ptr_rdp_arms, rdp_to_dp, strong_composition, PtrArm, RdpCurve};
use crate::error::{PtrError, Result};
use crate::ptr::PtrConfig;
use crate::subsampling::{
    blackbox_subsampled_rdp, check_conditions, integer_grid, subsampled_ptr_curve, subsampled_ptr_rdp,
    subsampled_rdp_lower_bound, SubsampleParams,
};

/// Orders of the default grid up to `max_alpha`.
pub fn alpha_grid_up_to(max_alpha: f64) -> Vec<f64> {
    default_alpha_grid().into_iter().filter(|&a| a <= max_alpha).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectVsRdpRow {
    pub delta0: f64,
    /// Direct analysis with the Gaussian charged `delta - delta0`.
    pub eps_direct: f64,
    pub eps_from_rdp: f64,
    /// Order chosen by the conversion, and the arm binding there.
    pub alpha: f64,
    pub arm: PtrArm,
}

/// One PTR release at total failure probability `delta`, both ways.
pub fn direct_vs_rdp(sigma1: f64, tau: f64, b: f64, delta: f64, delta0: f64, alphas: &[f64]) -> Result<DirectVsRdpRow> {
    if !(delta0 < delta) {
        return Err(PtrError::param("delta0", format!("must be below delta = {delta}, got {delta0}")));
    }
    let config = PtrConfig::new(sigma1, sigma1 * tau, tau, b, delta0)?;
    let direct = ptr_direct_dp(&config, delta - delta0, 1.0, 1.0)?;
    let curve = RdpCurve::from_fn(alphas, |a| ptr_rdp(&config, a))?;
    let conversion = rdp_to_dp(&curve, delta)?;
    Ok(DirectVsRdpRow {
        delta0,
        eps_direct: direct.eps,
        eps_from_rdp: conversion.guarantee.eps,
        alpha: conversion.alpha,
        arm: ptr_rdp_arms(&config, conversion.alpha)?.binding(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplificationRow {
    pub alpha: u32,
    /// Absent where the white-box conditions fail.
    pub eps_whitebox: Option<f64>,
    pub eps_blackbox: f64,
    pub eps_lower: f64,
    pub conditions_ok: bool,
}

/// White-box, black-box and lower amplification bounds at integer orders
/// `alpha_min..=alpha_max`.
pub fn amplification_rows(params: &SubsampleParams, alpha_min: u32, alpha_max: u32) -> Result<Vec<AmplificationRow>> {
    if alpha_min < 2 || alpha_max < alpha_min {
        return Err(PtrError::param("alpha range", format!("need 2 <= min <= max, got {alpha_min}..{alpha_max}")));
    }
    let base = RdpCurve::from_fn(&integer_grid(alpha_max), |a| ptr_rdp(&params.config, a))?;
    (alpha_min..=alpha_max)
        .map(|alpha| {
            let a = f64::from(alpha);
            let conditions_ok = params.q == 0.0 || check_conditions(params, a)?.satisfied;
            let eps_whitebox = if conditions_ok {
                Some(subsampled_ptr_rdp(params, a)?)
            } else {
                None
            };
            Ok(AmplificationRow {
                alpha,
                eps_whitebox,
                eps_blackbox: blackbox_subsampled_rdp(&base, params.q, alpha)?,
                eps_lower: subsampled_rdp_lower_bound(&base, params.q, alpha)?,
                conditions_ok,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub k: u64,
    /// Moments accountant on the white-box curve (black-box where the
    /// white-box conditions fail).
    pub eps_whitebox_ma: f64,
    pub eps_blackbox_ma: f64,
    /// Advanced composition of the amplified direct guarantee; absent when
    /// `delta0` leaves no room for the Gaussian's failure probability.
    pub eps_strong_composition: Option<f64>,
}

/// Per-step curves reused across `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionCurves {
    pub params: SubsampleParams,
    pub whitebox: RdpCurve,
    pub blackbox: RdpCurve,
}

impl CompositionCurves {
    pub fn new(params: SubsampleParams, alphas: &[f64]) -> Result<Self> {
        let whitebox = subsampled_ptr_curve(&params, alphas)?.curve;
        let max_ceil = alphas.iter().fold(2.0f64, |m, a| m.max(a.ceil())) as u32;
        let base = RdpCurve::from_fn(&integer_grid(max_ceil), |a| ptr_rdp(&params.config, a))?;
        let blackbox = RdpCurve::from_fn(alphas, |a| {
            blackbox_subsampled_rdp(&base, params.q, (a.ceil() as u32).max(2))
        })?;
        Ok(Self {
            params,
            whitebox,
            blackbox,
        })
    }

    pub fn row(&self, k: u64, delta: f64) -> Result<CompositionRow> {
        if k == 0 {
            return Err(PtrError::param("k", "must be at least 1"));
        }
        Ok(CompositionRow {
            k,
            eps_whitebox_ma: rdp_to_dp(&self.whitebox.scaled(k as f64), delta)?.guarantee.eps,
            eps_blackbox_ma: rdp_to_dp(&self.blackbox.scaled(k as f64), delta)?.guarantee.eps,
            eps_strong_composition: strong_composition_subsampled(&self.params, k, delta)?,
        })
    }
}

/// Advanced composition of `k` subsampled direct PTR guarantees at total
/// failure probability `delta`.
///
/// Half of `delta` is the composition slack; the other half is split evenly
/// over the steps. A step's direct guarantee `(eps, delta_g + delta0)` is
/// amplified to `(ln(1 + q(e^eps - 1)), q (delta_g + delta0))`, with
/// `delta_g` chosen so the steps use exactly their share. Returns `None`
/// when `delta0` alone exceeds the share.
pub fn strong_composition_subsampled(params: &SubsampleParams, k: u64, delta: f64) -> Result<Option<f64>> {
    let q = params.q;
    if q == 0.0 {
        return Ok(Some(0.0));
    }
    let share = delta / (2.0 * k as f64 * q);
    let delta_g = share - params.config.delta0;
    if !(delta_g > 0.0) {
        return Ok(None);
    }
    let direct = ptr_direct_dp(&params.config, delta_g, 1.0, 1.0)?;
    let eps_step = (q * direct.eps.exp_m1()).ln_1p();
    let delta_step = q * direct.delta;
    Ok(Some(strong_composition(eps_step, delta_step, k, 0.5 * delta)?.eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_params() -> SubsampleParams {
        SubsampleParams::new(0.01, PtrConfig::new(4.0, 4.0, 1.0, 1.0, 1e-5).unwrap()).unwrap()
    }

    #[test]
    fn direct_route_uses_the_remaining_delta() {
        let row = direct_vs_rdp(20.0, 0.5, 1.0, 1e-5, 5e-6, &alpha_grid_up_to(200.0)).unwrap();
        assert!(row.eps_from_rdp < row.eps_direct);
        assert!(direct_vs_rdp(20.0, 0.5, 1.0, 1e-5, 1e-5, &[2.0]).is_err());
    }

    #[test]
    fn amplification_rows_leave_whitebox_empty_when_conditions_fail() {
        let rows = amplification_rows(&fig2_params(), 2, 40).unwrap();
        assert_eq!(rows.len(), 39);
        assert!(rows.iter().any(|r| !r.conditions_ok));
        for r in &rows {
            assert_eq!(r.eps_whitebox.is_some(), r.conditions_ok);
        }
    }

    #[test]
    fn q_zero_rows_are_zero() {
        let params = SubsampleParams::new(0.0, fig2_params().config).unwrap();
        for r in amplification_rows(&params, 2, 10).unwrap() {
            assert_eq!(r.eps_whitebox, Some(0.0));
            assert_eq!(r.eps_blackbox, 0.0);
            assert_eq!(r.eps_lower, 0.0);
        }
    }

    #[test]
    fn single_step_composition_is_the_single_conversion() {
        let curves = CompositionCurves::new(fig2_params(), &alpha_grid_up_to(200.0)).unwrap();
        let row = curves.row(1, 1e-5).unwrap();
        let single = rdp_to_dp(&curves.whitebox, 1e-5).unwrap().guarantee.eps;
        assert_eq!(row.eps_whitebox_ma, single);
        assert!(row.eps_whitebox_ma <= row.eps_blackbox_ma);
    }

    #[test]
    fn strong_composition_needs_room_for_delta0() {
        let params = SubsampleParams::new(0.01, PtrConfig::new(12.0, 4.0, 1.0 / 3.0, 2.0, 1e-5).unwrap()).unwrap();
        assert_eq!(strong_composition_subsampled(&params, 1000, 1e-5).unwrap(), None);
    }
}
