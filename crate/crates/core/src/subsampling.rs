//! Rényi bounds for PTR run on a Poisson subsample.
//!
//! The white-box bound needs moments of the likelihood ratio between the
//! Laplace test noise on neighbouring inputs,
//! `r(s) = (1 - q) + q exp((|s| - |s - 1|) / b)`, taken under `Lap(0, b)`:
//! `R(k) = E[r(s)^k]`. The ratio is constant outside `[0, 1]`, so the tails
//! are closed-form and only `[0, 1]` is integrated numerically.
//!
//! The bound is proven only inside a region of `(q, sigma, alpha)`;
//! [`check_conditions`] reports where that region ends. Outside it,
//! [`subsampled_ptr_curve`] falls back to the generic amplification bound
//! [`blackbox_subsampled_rdp`], which consumes only an RDP curve.

use serde::{Deserialize, Serialize};

use crate::accountant::{ptr_rdp, RdpCurve};
use crate::error::{PtrError, Result};
use crate::math::{ln_binomial, ln_expm1, log_sum_exp};
use crate::ptr::PtrConfig;
use crate::quadrature::integrate;

const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_ABS_TOL: f64 = 1e-18;

/// Poisson inclusion probability together with the per-step PTR config
/// (normalized to unit global sensitivity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleParams {
    pub q: f64,
    pub config: PtrConfig,
}

impl SubsampleParams {
    pub fn new(q: f64, config: PtrConfig) -> Result<Self> {
        check_q(q)?;
        config.validate()?;
        config.check_scale_relation()?;
        Ok(Self { q, config })
    }
}

fn check_q(q: f64) -> Result<()> {
    if (0.0..1.0).contains(&q) {
        Ok(())
    } else {
        Err(PtrError::param("q", format!("sampling probability must lie in [0, 1), got {q}")))
    }
}

/// Arguments of [`mixture_moment_r`] and [`mixture_moment_rtilde`]; `order`
/// may be any real number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureMomentQuery {
    pub q: f64,
    pub b: f64,
    pub order: f64,
}

impl MixtureMomentQuery {
    pub fn new(q: f64, b: f64, order: f64) -> Result<Self> {
        check_q(q)?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(PtrError::param("b", format!("must be positive, got {b}")));
        }
        if !order.is_finite() {
            return Err(PtrError::param("order", "must be finite"));
        }
        Ok(Self { q, b, order })
    }
}

/// `ln r(s)` on `[0, 1]`, where `|s| - |s - 1| = 2s - 1`.
fn ln_ratio_inside(q: f64, b: f64, s: f64) -> f64 {
    (q * ((2.0 * s - 1.0) / b).exp_m1()).ln_1p()
}

/// `E_{Lap(0, b)}[g(r(s))]` split into the constant tails and the middle integral.
fn laplace_expectation<G: Fn(f64) -> f64>(q: f64, b: f64, g: G) -> Result<f64> {
    let ln_r_left = (q * (-1.0 / b).exp_m1()).ln_1p();
    let ln_r_right = (q * (1.0 / b).exp_m1()).ln_1p();
    let left = 0.5 * g(ln_r_left);
    let right = 0.5 * (-1.0 / b).exp() * g(ln_r_right);
    let middle = integrate(
        |s| (0.5 / b) * (-s / b).exp() * g(ln_ratio_inside(q, b, s)),
        0.0,
        1.0,
        QUAD_REL_TOL,
        QUAD_ABS_TOL,
    )?;
    Ok(left + middle + right)
}

/// `R(k) - 1`, evaluated without cancellation so that tiny `q` keeps full
/// relative precision.
fn mixture_moment_excess(q: f64, b: f64, order: f64) -> Result<f64> {
    if q == 0.0 || order == 0.0 || order == 1.0 {
        return Ok(0.0);
    }
    laplace_expectation(q, b, |ln_r| (order * ln_r).exp_m1())
}

/// `E[r^k (r - (1 - q))^2]`, the bracketed combination in the white-box bound.
fn centered_moment(q: f64, b: f64, order: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(0.0);
    }
    laplace_expectation(q, b, |ln_r| {
        let r = ln_r.exp();
        let shifted = r - (1.0 - q);
        (order * ln_r).exp() * shifted * shifted
    })
}

/// `R_q(k) = E_{s ~ Lap(0, b)}[r(s)^k]`.
pub fn mixture_moment_r(query: MixtureMomentQuery) -> Result<f64> {
    let query = MixtureMomentQuery::new(query.q, query.b, query.order)?;
    Ok(1.0 + mixture_moment_excess(query.q, query.b, query.order)?)
}

/// `R~_q(k) = E_{s ~ mu}[(mu0(s) / mu(s))^k]` for the mixture `mu`, computed
/// through the identity `R~_q(k) = R_q(1 - k)`.
pub fn mixture_moment_rtilde(query: MixtureMomentQuery) -> Result<f64> {
    mixture_moment_r(MixtureMomentQuery {
        order: 1.0 - query.order,
        ..query
    })
}

/// The constraint deciding a [`ConditionReport`]: the first violated one,
/// or the tighter of the two order limits when all hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    /// `q <= e^{-1/b} / (4 + e^{-1/b})`.
    QBound,
    /// `sigma1 >= sigma2`.
    SigmaOrder,
    /// `sigma2 >= 4`.
    SigmaFloor,
    /// `1 < alpha <= sigma2^2 L / 2 - 2 ln sigma2`.
    AlphaLinear,
    /// `alpha <= (sigma2^2 L^2 / 2 - ln 5 - 2 ln sigma2) / (L + ln(q' alpha) + 1 / (2 sigma2^2))`.
    AlphaRatio,
}

impl BindingConstraint {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingConstraint::QBound => "q_bound",
            BindingConstraint::SigmaOrder => "sigma_order",
            BindingConstraint::SigmaFloor => "sigma_floor",
            BindingConstraint::AlphaLinear => "alpha_linear",
            BindingConstraint::AlphaRatio => "alpha_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// `ln(1 + 1 / (q' (alpha - 1)))`; infinite at `q = 0`.
    pub l: f64,
    /// `q / (q + (1 - q) e^{-1/b})`.
    pub q_prime: f64,
    pub binding_constraint: BindingConstraint,
}

/// Largest `q` for which the white-box bound is proven at Laplace scale `b`.
pub fn q_bound(b: f64) -> f64 {
    let e = (-1.0 / b).exp();
    e / (4.0 + e)
}

/// Evaluates every validity condition of the white-box bound at `alpha`.
pub fn check_conditions(params: &SubsampleParams, alpha: f64) -> Result<ConditionReport> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(PtrError::Domain(format!("Rényi order must exceed 1, got {alpha}")));
    }
    let SubsampleParams { q, config } = *params;
    let e = (-1.0 / config.b).exp();
    let q_prime = q / (q + (1.0 - q) * e);
    let l = (1.0 / (q_prime * (alpha - 1.0))).ln_1p();
    let s2 = config.sigma2;
    let ln_s2 = s2.ln();
    let linear_limit = s2 * s2 * l / 2.0 - 2.0 * ln_s2;
    // L + ln(q' alpha) rewritten as ln(alpha/(alpha-1)) + ln(1 + q'(alpha-1)),
    // which stays finite (and positive) at q' = 0
    let denom = (alpha / (alpha - 1.0)).ln() + (q_prime * (alpha - 1.0)).ln_1p() + 1.0 / (2.0 * s2 * s2);
    let ratio_limit = (s2 * s2 * l * l / 2.0 - 5f64.ln() - 2.0 * ln_s2) / denom;

    let violated = if q > q_bound(config.b) {
        Some(BindingConstraint::QBound)
    } else if config.sigma1 < s2 {
        Some(BindingConstraint::SigmaOrder)
    } else if s2 < 4.0 {
        Some(BindingConstraint::SigmaFloor)
    } else if alpha > linear_limit {
        Some(BindingConstraint::AlphaLinear)
    } else if alpha > ratio_limit {
        Some(BindingConstraint::AlphaRatio)
    } else {
        None
    };
    let binding_constraint = violated.unwrap_or(if linear_limit <= ratio_limit {
        BindingConstraint::AlphaLinear
    } else {
        BindingConstraint::AlphaRatio
    });
    Ok(ConditionReport {
        satisfied: violated.is_none(),
        l,
        q_prime,
        binding_constraint,
    })
}

/// The three candidate moments of the white-box bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteBoxMoments {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Evaluates `B0`, `B1`, `B2` without checking the validity conditions.
pub fn whitebox_moments(params: &SubsampleParams, alpha: f64) -> Result<WhiteBoxMoments> {
    let SubsampleParams { q, config } = *params;
    let (a, b) = (alpha, config.b);
    let s1_sq = config.sigma1 * config.sigma1;
    let s2_sq = config.sigma2 * config.sigma2;
    let gauss = 2.0 * a * (a - 1.0) / s1_sq;
    let b0 = 1.0 + 2.0 * q * q * a * (a - 1.0) * ((1.0 - config.delta0) / s1_sq + config.delta0 / s2_sq);
    // R(a) - 2(1-q) R(a-1) + (1-q)^2 R(a-2) = E[r^{a-2} (r - (1-q))^2]
    let b1 = 1.0 + mixture_moment_excess(q, b, a)? + gauss * centered_moment(q, b, a - 2.0)?;
    // the same combination of R~ at a, a+1, a+2 is E[r^{-a-1} (r - (1-q))^2]
    let b2 = 1.0 + mixture_moment_excess(q, b, 1.0 - a)? + gauss * centered_moment(q, b, -a - 1.0)?;
    Ok(WhiteBoxMoments { b0, b1, b2 })
}

/// White-box RDP of subsampled PTR at order `alpha`. Fails with
/// [`PtrError::BoundNotApplicable`] outside the proven region.
pub fn subsampled_ptr_rdp(params: &SubsampleParams, alpha: f64) -> Result<f64> {
    let params = SubsampleParams::new(params.q, params.config)?;
    if params.q == 0.0 {
        return Ok(0.0);
    }
    let report = check_conditions(&params, alpha)?;
    if !report.satisfied {
        return Err(PtrError::BoundNotApplicable {
            alpha,
            reason: format!("constraint {} violated", report.binding_constraint.as_str()),
        });
    }
    let m = whitebox_moments(&params, alpha)?;
    Ok(m.b0.max(m.b1).max(m.b2).ln() / (alpha - 1.0))
}

fn integer_order(alpha: u32) -> Result<()> {
    if alpha >= 2 {
        Ok(())
    } else {
        Err(PtrError::Domain(format!("integer Rényi order must be at least 2, got {alpha}")))
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Generic upper bound on the RDP of a Poisson-subsampled mechanism at
/// integer order `alpha`, from its base curve at orders `2..=alpha` and its
/// pure-DP cap.
///
/// Without a cap the second-order term uses `4(e^{eps(2)} - 1)` and the
/// higher terms saturate at 2.
pub fn blackbox_subsampled_rdp(base: &RdpCurve, q: f64, alpha: u32) -> Result<f64> {
    integer_order(alpha)?;
    check_q(q)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let eps_inf = base.pure_dp_eps();
    let ln_q = q.ln();
    let eps2 = base.eps_at(2.0)?;
    let second = if eps_inf.is_infinite() {
        4f64.ln() + ln_expm1(eps2)
    } else {
        let capped = eps2 + (2f64.ln()).min(2.0 * ln_expm1(eps_inf));
        4f64.ln() + ln_expm1(eps2).min(capped)
    };
    let mut terms = vec![2.0 * ln_q + ln_binomial(alpha.into(), 2) + second];
    for j in 3..=alpha {
        let jf = f64::from(j);
        let cap = if eps_inf.is_infinite() {
            2f64.ln()
        } else {
            (2f64.ln()).min(jf * ln_expm1(eps_inf))
        };
        terms.push(jf * ln_q + ln_binomial(alpha.into(), j.into()) + (jf - 1.0) * base.eps_at(jf)? + cap);
    }
    Ok(softplus(log_sum_exp(&terms)) / (f64::from(alpha) - 1.0))
}

/// Lower bound on the RDP of any Poisson-subsampled mechanism with base
/// curve `base`, at integer order `alpha`. For a Gaussian base it is the
/// exact subsampled-Gaussian RDP.
pub fn subsampled_rdp_lower_bound(base: &RdpCurve, q: f64, alpha: u32) -> Result<f64> {
    integer_order(alpha)?;
    check_q(q)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let a = f64::from(alpha);
    let ln_1mq = (-q).ln_1p();
    let mut terms = vec![(a - 1.0) * ln_1mq + ((a - 1.0) * q).ln_1p()];
    for j in 2..=alpha {
        let jf = f64::from(j);
        terms.push(
            ln_binomial(alpha.into(), j.into())
                + (a - jf) * ln_1mq
                + jf * q.ln()
                + (jf - 1.0) * base.eps_at(jf)?,
        );
    }
    Ok((log_sum_exp(&terms) / (a - 1.0)).max(0.0))
}

/// Integer orders `2..=max_order` as a curve grid.
pub fn integer_grid(max_order: u32) -> Vec<f64> {
    (2..=max_order).map(f64::from).collect()
}

/// Where a per-order value in a [`SubsampledCurve`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    WhiteBox,
    /// Generic bound at `ceil(alpha)`, valid because RDP is nondecreasing in the order.
    BlackBox,
}

/// Per-step RDP curve of subsampled PTR with the provenance of each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampledCurve {
    pub curve: RdpCurve,
    pub sources: Vec<BoundSource>,
}

impl SubsampledCurve {
    /// Fraction of orders covered by the white-box bound.
    pub fn whitebox_coverage(&self) -> f64 {
        let n = self.sources.iter().filter(|s| **s == BoundSource::WhiteBox).count();
        n as f64 / self.sources.len() as f64
    }
}

/// Per-step RDP of subsampled PTR on `alphas`: the white-box bound where it
/// is proven, otherwise the black-box bound at `ceil(alpha)`.
pub fn subsampled_ptr_curve(params: &SubsampleParams, alphas: &[f64]) -> Result<SubsampledCurve> {
    let params = SubsampleParams::new(params.q, params.config)?;
    let max_ceil = alphas.iter().fold(2.0f64, |m, a| m.max(a.ceil())) as u32;
    let base = RdpCurve::from_fn(&integer_grid(max_ceil), |a| ptr_rdp(&params.config, a))?;
    let mut points = Vec::with_capacity(alphas.len());
    let mut sources = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let (eps, source) = match subsampled_ptr_rdp(&params, alpha) {
            Ok(eps) => (eps, BoundSource::WhiteBox),
            Err(PtrError::BoundNotApplicable { .. }) => {
                let order = (alpha.ceil() as u32).max(2);
                (blackbox_subsampled_rdp(&base, params.q, order)?, BoundSource::BlackBox)
            }
            Err(e) => return Err(e),
        };
        points.push((alpha, eps));
        sources.push(source);
    }
    Ok(SubsampledCurve {
        curve: RdpCurve::new(points)?,
        sources,
    })
}

/// Per-step RDP of the Poisson-subsampled Gaussian mechanism with noise
/// multiplier `sigma` at integer orders `2..=max_order`.
pub fn subsampled_gaussian_curve(sigma: f64, q: f64, max_order: u32) -> Result<RdpCurve> {
    let grid = integer_grid(max_order);
    let base = RdpCurve::from_fn(&grid, |a| Ok(a / (2.0 * sigma * sigma)))?;
    RdpCurve::from_fn(&grid, |a| subsampled_rdp_lower_bound(&base, q, a as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(q: f64, sigma1: f64, sigma2: f64, b: f64, delta0: f64) -> SubsampleParams {
        let config = PtrConfig::new(sigma1, sigma2, sigma2 / sigma1, b, delta0).unwrap();
        SubsampleParams::new(q, config).unwrap()
    }

    fn r(q: f64, b: f64, order: f64) -> f64 {
        mixture_moment_r(MixtureMomentQuery::new(q, b, order).unwrap()).unwrap()
    }

    #[test]
    fn moment_trivial_cases() {
        assert_eq!(r(0.3, 1.0, 1.0), 1.0);
        assert_eq!(r(0.0, 1.0, 7.5), 1.0);
        assert_eq!(r(0.3, 1.0, 0.0), 1.0);
        let rt = mixture_moment_rtilde(MixtureMomentQuery::new(0.3, 2.0, 0.0).unwrap()).unwrap();
        assert_eq!(rt, 1.0);
    }

    #[test]
    fn second_moment_closed_form() {
        // binomial expansion: (1-q)^2 + 2q(1-q) + q^2 E[e^{2(|s|-|s-1|)/b}]
        let (q, b) = (0.1, 1.0);
        let lap_second = (2.0 / 3.0) * 1f64.exp() + (1.0 / 3.0) * (-2f64).exp();
        let expected = (1.0 - q) * (1.0 - q) + 2.0 * q * (1.0 - q) + q * q * lap_second;
        assert_abs_diff_eq!(r(q, b, 2.0), expected, epsilon = 1e-13);
    }

    #[test]
    fn centered_moment_matches_expansion() {
        for &(q, b, k) in &[(0.05, 1.0, 3.0), (0.08, 0.5, -4.0), (0.01, 2.0, 1.5)] {
            let direct = r(q, b, k + 2.0) - 2.0 * (1.0 - q) * r(q, b, k + 1.0) + (1.0 - q).powi(2) * r(q, b, k);
            let c = centered_moment(q, b, k).unwrap();
            assert!((c - direct).abs() < 1e-10 * c.abs().max(1e-12), "{c} vs {direct}");
        }
    }

    #[test]
    fn conditions_examples() {
        let p = params(0.01, 4.0, 4.0, 1.0, 1e-5);
        let rep = check_conditions(&p, 2.0).unwrap();
        assert!(rep.satisfied);
        assert_abs_diff_eq!(q_bound(1.0), 0.084_223_808_4, epsilon = 1e-10);

        let rep = check_conditions(&params(0.01, 3.9, 3.9, 1.0, 1e-5), 2.0).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.binding_constraint, BindingConstraint::SigmaFloor);

        let rep = check_conditions(&params(0.2, 4.0, 4.0, 1.0, 1e-5), 2.0).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.binding_constraint, BindingConstraint::QBound);

        let rep = check_conditions(&params(0.0, 4.0, 4.0, 1.0, 1e-5), 50.0).unwrap();
        assert!(rep.satisfied && rep.l.is_infinite());
    }

    #[test]
    fn whitebox_zero_at_q_zero_and_monotone_in_q() {
        assert_eq!(subsampled_ptr_rdp(&params(0.0, 4.0, 4.0, 1.0, 1e-5), 3.0).unwrap(), 0.0);
        let small = subsampled_ptr_rdp(&params(0.005, 4.0, 4.0, 1.0, 1e-5), 3.0).unwrap();
        let large = subsampled_ptr_rdp(&params(0.01, 4.0, 4.0, 1.0, 1e-5), 3.0).unwrap();
        assert!(0.0 < small && small <= large);
    }

    #[test]
    fn whitebox_rejects_outside_region() {
        let err = subsampled_ptr_rdp(&params(0.2, 4.0, 4.0, 1.0, 1e-5), 2.0).unwrap_err();
        assert!(matches!(err, PtrError::BoundNotApplicable { .. }));
    }

    #[test]
    fn blackbox_closed_form() {
        let base = RdpCurve::new(vec![(2.0, 1.0)]).unwrap();
        let v = blackbox_subsampled_rdp(&base, 0.1, 2).unwrap();
        assert_abs_diff_eq!(v, (1.0 + 0.01 * 4.0 * 1f64.exp_m1()).ln(), epsilon = 1e-14);
        assert_eq!(blackbox_subsampled_rdp(&base, 0.0, 2).unwrap(), 0.0);
        assert!(matches!(
            blackbox_subsampled_rdp(&base, 0.1, 3),
            Err(PtrError::MissingOrder(_))
        ));
    }

    #[test]
    fn blackbox_uses_pure_dp_cap() {
        let base = RdpCurve::new(vec![(2.0, 1.0), (3.0, 1.0)]).unwrap().with_pure_dp(0.1).unwrap();
        let capped = blackbox_subsampled_rdp(&base, 0.1, 3).unwrap();
        let uncapped = blackbox_subsampled_rdp(&RdpCurve::new(vec![(2.0, 1.0), (3.0, 1.0)]).unwrap(), 0.1, 3).unwrap();
        assert!(capped < uncapped);
    }

    #[test]
    fn lower_bound_order_two() {
        let base = RdpCurve::new(vec![(2.0, 0.7)]).unwrap();
        let q: f64 = 0.05;
        let expected = ((1.0 - q) * (1.0 + q) + q * q * 0.7f64.exp()).ln();
        assert_abs_diff_eq!(subsampled_rdp_lower_bound(&base, q, 2).unwrap(), expected, epsilon = 1e-14);
        assert_eq!(subsampled_rdp_lower_bound(&base, 0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn lower_bound_is_identity_at_q_one_limit() {
        // q -> 1 recovers the base curve
        let grid = integer_grid(6);
        let base = RdpCurve::from_fn(&grid, |a| Ok(a / 8.0)).unwrap();
        let v = subsampled_rdp_lower_bound(&base, 1.0 - 1e-12, 6).unwrap();
        assert_abs_diff_eq!(v, 6.0 / 8.0, epsilon = 1e-9);
    }

    #[test]
    fn combined_curve_falls_back() {
        let p = params(0.01, 4.0, 4.0, 1.0, 1e-5);
        let alphas = [1.5, 2.0, 4.0, 8.0, 64.0, 150.0];
        let c = subsampled_ptr_curve(&p, &alphas).unwrap();
        assert_eq!(c.sources[1], BoundSource::WhiteBox);
        assert_eq!(c.sources[5], BoundSource::BlackBox);
        assert!(c.whitebox_coverage() > 0.0 && c.whitebox_coverage() < 1.0);
    }
}
