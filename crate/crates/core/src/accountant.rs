//! RDP curves, the direct and Rényi bounds for PTR, conversion to
//! `(eps, delta)`-DP, and composition.
//!
//! A curve stores `eps(alpha)` at a finite set of orders and is only ever
//! evaluated there. Conversion minimizes over the stored orders.
//!
//! Two conversion rules are computed side by side:
//!
//! * classic: `eps(a) + ln(1/delta) / (a - 1)`
//! * tight: `eps(a) + ln((a - 1) / a) - (ln delta + ln a) / (a - 1)`
//!
//! The tight value is reported, clamped at zero; the classic value rides
//! along for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{PtrError, Result};
use crate::math::{ln_expm1, log_weighted_sum_exp};
use crate::noise::{gaussian_dp_eps, gaussian_rdp_eps, laplace_rdp_eps, NoiseToSensitivityRatio};
use crate::ptr::PtrConfig;

/// A Rényi moment `E[(mu/mu')^alpha]`, held as its logarithm so that
/// `alpha` in the hundreds cannot overflow.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Moment {
    ln: f64,
}

impl Moment {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    pub fn from_value(value: f64) -> Self {
        Self { ln: value.ln() }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    /// The moment itself; `inf` once it leaves the f64 range.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }
}

/// `f_alpha(eps) = exp((alpha - 1) eps)`.
pub fn f_alpha(eps: f64, alpha: f64) -> Moment {
    Moment::from_ln((alpha - 1.0) * eps)
}

/// `f_alpha^{-1}(x) = ln(x) / (alpha - 1)`.
pub fn f_alpha_inv(moment: Moment, alpha: f64) -> f64 {
    moment.ln() / (alpha - 1.0)
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(PtrError::Domain(format!("Rényi order must exceed 1, got {alpha}")))
    }
}

/// Orders `1.1, 1.2, ..., 10.0` followed by the integers `11..=200`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=90)
        .map(|k| 1.0 + k as f64 / 10.0)
        .chain((11..=200).map(f64::from))
        .collect()
}

/// `eps(alpha)` at a strictly increasing list of orders, plus an optional
/// pure-DP value standing in for `eps(infinity)` (absent means unbounded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    points: Vec<(f64, f64)>,
    pure_dp_eps: Option<f64>,
}

impl RdpCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(PtrError::EmptyCurve);
        }
        for (i, &(alpha, eps)) in points.iter().enumerate() {
            check_order(alpha)?;
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(PtrError::Domain(format!(
                    "curve value at alpha = {alpha} must be finite and nonnegative, got {eps}"
                )));
            }
            if i > 0 && points[i - 1].0 >= alpha {
                return Err(PtrError::param("alphas", "must be strictly increasing"));
            }
        }
        Ok(Self {
            points,
            pure_dp_eps: None,
        })
    }

    /// Evaluates `eps` at every order of `alphas`.
    pub fn from_fn<F: FnMut(f64) -> Result<f64>>(alphas: &[f64], mut eps: F) -> Result<Self> {
        let points = alphas
            .iter()
            .map(|&a| eps(a).map(|e| (a, e)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn with_pure_dp(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(PtrError::param("pure_dp_eps", format!("must be nonnegative, got {eps}")));
        }
        self.pure_dp_eps = Some(eps);
        Ok(self)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// `eps(infinity)`; `f64::INFINITY` when the curve has no pure-DP cap.
    pub fn pure_dp_eps(&self) -> f64 {
        self.pure_dp_eps.unwrap_or(f64::INFINITY)
    }

    /// Value at a stored order. No interpolation.
    pub fn eps_at(&self, alpha: f64) -> Result<f64> {
        self.points
            .iter()
            .find(|p| p.0 == alpha)
            .map(|p| p.1)
            .ok_or(PtrError::MissingOrder(alpha))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpGuarantee {
    pub eps: f64,
    pub delta: f64,
}

impl DpGuarantee {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(PtrError::param("eps", format!("must be nonnegative, got {eps}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(PtrError::param("delta", format!("must lie in [0, 1), got {delta}")));
        }
        Ok(Self { eps, delta })
    }
}

/// Outcome of [`rdp_to_dp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConversion {
    /// Tight-rule guarantee.
    pub guarantee: DpGuarantee,
    /// Order minimizing the tight rule.
    pub alpha: f64,
    pub classic_eps: f64,
    pub classic_alpha: f64,
}

/// `(eps, delta)` of one PTR release analysed directly: the Laplace test
/// costs `1/b` and the large-noise Gaussian costs its classic bound, with
/// `delta0` added to the failure probability.
pub fn ptr_direct_dp(config: &PtrConfig, delta: f64, gs_f1: f64, gs_f2: f64) -> Result<DpGuarantee> {
    if (gs_f1 - gs_f2).abs() > 1e-12 * gs_f1.abs().max(gs_f2.abs()) {
        return Err(PtrError::Config(format!(
            "target and robust statistic must share a global sensitivity, got {gs_f1} and {gs_f2}"
        )));
    }
    let unit = config.normalized(gs_f1)?;
    unit.check_scale_relation()?;
    let gauss = gaussian_dp_eps(NoiseToSensitivityRatio::new(unit.sigma1)?, delta)?;
    DpGuarantee::new(1.0 / unit.b + gauss.eps, unit.delta0 + delta)
}

/// `(1 - delta0) f_alpha(eps1) + delta0 f_alpha(eps2)`, evaluated in log space.
pub fn mixture_rdp_moment(eps1: f64, eps2: f64, delta0: f64, alpha: f64) -> Result<Moment> {
    check_order(alpha)?;
    if !(0.0..=1.0).contains(&delta0) {
        return Err(PtrError::param("delta0", format!("must lie in [0, 1], got {delta0}")));
    }
    Ok(Moment::from_ln(log_weighted_sum_exp(
        1.0 - delta0,
        (alpha - 1.0) * eps1,
        delta0,
        (alpha - 1.0) * eps2,
    )))
}

/// Which term of the PTR Rényi bound is larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtrArm {
    /// The `delta0`-weighted mixture of the two Gaussian moments.
    Mixture,
    /// Large-noise Gaussian composed with the Laplace test.
    Composed,
}

impl PtrArm {
    pub fn as_str(self) -> &'static str {
        match self {
            PtrArm::Mixture => "mixture",
            PtrArm::Composed => "composed",
        }
    }
}

/// Both terms of the PTR Rényi bound at one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtrRdpArms {
    pub mixture: f64,
    pub composed: f64,
    pub eps_gauss_large: f64,
    pub eps_lap: f64,
}

impl PtrRdpArms {
    pub fn value(&self) -> f64 {
        self.mixture.max(self.composed)
    }

    pub fn binding(&self) -> PtrArm {
        if self.mixture > self.composed {
            PtrArm::Mixture
        } else {
            PtrArm::Composed
        }
    }
}

fn unit_sensitivity(config: &PtrConfig) -> Result<()> {
    config.validate()?;
    config.check_scale_relation()
}

/// Evaluates both terms of the PTR Rényi bound. The config must already be
/// normalized to unit global sensitivity.
pub fn ptr_rdp_arms(config: &PtrConfig, alpha: f64) -> Result<PtrRdpArms> {
    unit_sensitivity(config)?;
    check_order(alpha)?;
    let eps1 = gaussian_rdp_eps(NoiseToSensitivityRatio::new(config.sigma1)?, alpha)?;
    let eps2 = gaussian_rdp_eps(NoiseToSensitivityRatio::new(config.sigma2)?, alpha)?;
    let eps_lap = laplace_rdp_eps(NoiseToSensitivityRatio::new(config.b)?, alpha)?;
    let mixture = f_alpha_inv(mixture_rdp_moment(eps1, eps2, config.delta0, alpha)?, alpha);
    Ok(PtrRdpArms {
        mixture,
        composed: eps1 + eps_lap,
        eps_gauss_large: eps1,
        eps_lap,
    })
}

/// RDP of one PTR release at order `alpha`.
pub fn ptr_rdp(config: &PtrConfig, alpha: f64) -> Result<f64> {
    Ok(ptr_rdp_arms(config, alpha)?.value())
}

/// PTR's RDP curve on `alphas`; it has no pure-DP cap.
pub fn ptr_rdp_curve(config: &PtrConfig, alphas: &[f64]) -> Result<RdpCurve> {
    RdpCurve::from_fn(alphas, |a| ptr_rdp(config, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalDelta0 {
    /// Value clamped into `(0, 1/2)`, usable in a [`PtrConfig`].
    pub delta0: f64,
    /// Unclamped solution of the arm-equality equation.
    pub raw: f64,
}

impl OptimalDelta0 {
    pub fn was_clamped(&self) -> bool {
        self.delta0 != self.raw
    }
}

/// The `delta0` at which both terms of the PTR bound coincide:
/// `f(eps_N1) (f(eps_Lap) - 1) / (f(eps_N2) - f(eps_N1))`.
pub fn optimal_delta0(sigma1: f64, sigma2: f64, b: f64, alpha: f64) -> Result<OptimalDelta0> {
    check_order(alpha)?;
    if !(sigma1 > sigma2) {
        return Err(PtrError::Config(format!(
            "optimal delta0 needs sigma1 > sigma2, got {sigma1} and {sigma2}"
        )));
    }
    let eps1 = gaussian_rdp_eps(NoiseToSensitivityRatio::new(sigma1)?, alpha)?;
    let eps2 = gaussian_rdp_eps(NoiseToSensitivityRatio::new(sigma2)?, alpha)?;
    let eps_lap = laplace_rdp_eps(NoiseToSensitivityRatio::new(b)?, alpha)?;
    let m = alpha - 1.0;
    // f(eps_N1) (f(eps_Lap) - 1) / (f(eps_N2) - f(eps_N1)) with the
    // f(eps_N1) factor cancelled against the denominator
    let raw = (ln_expm1(m * eps_lap) - ln_expm1(m * (eps2 - eps1))).exp();
    let upper = 0.5 * (1.0 - 1e-12);
    let delta0 = raw.clamp(f64::MIN_POSITIVE, upper);
    Ok(OptimalDelta0 { delta0, raw })
}

/// Converts an RDP curve to `(eps, delta)`-DP by minimizing over its orders.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<DpConversion> {
    if curve.is_empty() {
        return Err(PtrError::EmptyCurve);
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(PtrError::Domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    if curve.points().iter().all(|p| p.1 == 0.0) {
        // zero divergence at every order: the output laws coincide
        let alpha = curve.points()[0].0;
        return Ok(DpConversion {
            guarantee: DpGuarantee { eps: 0.0, delta },
            alpha,
            classic_eps: 0.0,
            classic_alpha: alpha,
        });
    }
    let ln_delta = delta.ln();
    let mut tight = (f64::INFINITY, f64::NAN);
    let mut classic = (f64::INFINITY, f64::NAN);
    for &(alpha, eps) in curve.points() {
        let m = alpha - 1.0;
        let c = eps - ln_delta / m;
        if c < classic.0 {
            classic = (c, alpha);
        }
        let t = eps + (m / alpha).ln() - (ln_delta + alpha.ln()) / m;
        if t < tight.0 {
            tight = (t, alpha);
        }
    }
    Ok(DpConversion {
        guarantee: DpGuarantee {
            eps: tight.0.max(0.0),
            delta,
        },
        alpha: tight.1,
        classic_eps: classic.0.max(0.0),
        classic_alpha: classic.1,
    })
}

/// Pointwise sum of curves sharing one order grid.
pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let (first, rest) = curves.split_first().ok_or(PtrError::EmptyCurve)?;
    let mut out = first.clone();
    for curve in rest {
        out.add_assign(curve)?;
    }
    Ok(out)
}

impl RdpCurve {
    /// Adds `other` pointwise in place.
    pub fn add_assign(&mut self, other: &RdpCurve) -> Result<()> {
        let same_grid = self.len() == other.len() && self.alphas().zip(other.alphas()).all(|(a, b)| a == b);
        if !same_grid {
            return Err(PtrError::GridMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        for (p, q) in self.points.iter_mut().zip(other.points()) {
            p.1 += q.1;
        }
        self.pure_dp_eps = match (self.pure_dp_eps, other.pure_dp_eps) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Ok(())
    }

    /// Curve multiplied by `k`, i.e. `k`-fold self-composition.
    pub fn scaled(&self, k: f64) -> RdpCurve {
        RdpCurve {
            points: self.points.iter().map(|&(a, e)| (a, e * k)).collect(),
            pure_dp_eps: self.pure_dp_eps.map(|e| e * k),
        }
    }

    /// Curve of zeros on `alphas`.
    pub fn zero(alphas: &[f64]) -> Result<RdpCurve> {
        RdpCurve::from_fn(alphas, |_| Ok(0.0))?.with_pure_dp(0.0)
    }
}

/// `k`-fold composition of an `(eps, delta)` mechanism, taking the best of
/// naive composition and the two advanced-composition bounds with slack
/// `delta_prime`.
pub fn strong_composition(eps: f64, delta: f64, k: u64, delta_prime: f64) -> Result<DpGuarantee> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(PtrError::param("eps", format!("must be nonnegative, got {eps}")));
    }
    if k == 0 {
        return Err(PtrError::param("k", "must be at least 1"));
    }
    for (name, value) in [("delta", delta), ("delta_prime", delta_prime)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(PtrError::param(name, format!("must lie in (0, 1), got {value}")));
        }
    }
    let kf = k as f64;
    let naive = kf * eps;
    // (e^eps - 1) / (e^eps + 1) = tanh(eps / 2)
    let drift = kf * eps * (0.5 * eps).tanh();
    let plain = drift + eps * (2.0 * kf * (1.0 / delta_prime).ln()).sqrt();
    let refined = drift + eps * (2.0 * kf * (std::f64::consts::E + kf.sqrt() * eps / delta_prime).ln()).sqrt();
    Ok(DpGuarantee {
        eps: naive.min(plain).min(refined),
        delta: (kf * delta + delta_prime).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(sigma1: f64, sigma2: f64, b: f64, delta0: f64) -> PtrConfig {
        PtrConfig::new(sigma1, sigma2, sigma2 / sigma1, b, delta0).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 280);
        assert!((g[0] - 1.1).abs() < 1e-15);
        assert_eq!(*g.last().unwrap(), 200.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn f_alpha_roundtrip() {
        for &alpha in &[1.0001, 1.5, 2.0, 37.0, 500.0] {
            for &eps in &[0.0, 1e-3, 0.5, 7.0, 100.0] {
                let x = f_alpha(eps, alpha);
                assert_abs_diff_eq!(f_alpha_inv(x, alpha), eps, epsilon = 1e-12 * eps.max(1.0));
            }
        }
    }

    #[test]
    fn curve_validation() {
        assert!(RdpCurve::new(vec![]).is_err());
        assert!(RdpCurve::new(vec![(1.0, 0.1)]).is_err());
        assert!(RdpCurve::new(vec![(2.0, 0.1), (2.0, 0.2)]).is_err());
        assert!(RdpCurve::new(vec![(2.0, f64::INFINITY)]).is_err());
        let c = RdpCurve::new(vec![(2.0, 0.1), (3.0, 0.2)]).unwrap();
        assert_eq!(c.eps_at(3.0).unwrap(), 0.2);
        assert!(matches!(c.eps_at(2.5), Err(PtrError::MissingOrder(_))));
        assert_eq!(c.pure_dp_eps(), f64::INFINITY);
    }

    #[test]
    fn direct_dp_example() {
        let g = ptr_direct_dp(&cfg(5.0, 2.5, 1.0, 1e-8), 1e-5, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.eps, 1.968_961_052_521, epsilon = 1e-9);
        assert_abs_diff_eq!(g.delta, 1.001e-5, epsilon = 1e-15);

        let g = ptr_direct_dp(&cfg(5.0, 2.5, 1e6, 0.4), 1e-5, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.eps, 0.968_961_052_521, epsilon = 1e-5);
        assert_abs_diff_eq!(g.delta, 0.4 + 1e-5, epsilon = 1e-15);
    }

    #[test]
    fn direct_dp_checks_scales() {
        let bad = PtrConfig::new(5.0, 2.0, 0.5, 1.0, 1e-8).unwrap();
        assert!(matches!(ptr_direct_dp(&bad, 1e-5, 1.0, 1.0), Err(PtrError::Config(_))));
        assert!(matches!(
            ptr_direct_dp(&cfg(5.0, 2.5, 1.0, 1e-8), 1e-5, 1.0, 2.0),
            Err(PtrError::Config(_))
        ));
        // scales given in units of GS = 2
        let scaled = PtrConfig::new(10.0, 5.0, 1.0, 1.0, 1e-8).unwrap();
        let g = ptr_direct_dp(&scaled, 1e-5, 2.0, 2.0).unwrap();
        assert_abs_diff_eq!(g.eps, 1.968_961_052_521, epsilon = 1e-9);
    }

    #[test]
    fn mixture_limits() {
        let (e1, e2, a) = (0.3, 1.2, 3.0);
        let m = |d0, e2| mixture_rdp_moment(e1, e2, d0, a).unwrap().value();
        assert_abs_diff_eq!(m(0.0, e2), f_alpha(e1, a).value(), epsilon = 1e-12);
        assert_abs_diff_eq!(m(1.0, e2), f_alpha(e2, a).value(), epsilon = 1e-12);
        assert_abs_diff_eq!(m(0.3, e1), f_alpha(e1, a).value(), epsilon = 1e-12);
        assert!(mixture_rdp_moment(e1, e2, 1.5, a).is_err());
    }

    #[test]
    fn ptr_rdp_examples() {
        let arms = ptr_rdp_arms(&cfg(2.0, 1.0, 1.0, 1e-300), 2.0).unwrap();
        assert_abs_diff_eq!(arms.mixture, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(arms.value(), 0.25 + 0.619_123_629_998_593, epsilon = 1e-12);
        assert_eq!(arms.binding(), PtrArm::Composed);

        let arms = ptr_rdp_arms(&cfg(2.0, 1.0, 1.0, 0.49), 2.0).unwrap();
        let expected = (0.51 * 0.25f64.exp() + 0.49 * 1f64.exp()).ln();
        assert_abs_diff_eq!(arms.mixture, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(arms.value(), 0.869_123_629_998_593, epsilon = 1e-12);
    }

    #[test]
    fn optimal_delta0_example() {
        let opt = optimal_delta0(2.0, 1.0, 1.0, 2.0).unwrap();
        let expected = 0.25f64.exp() * (0.619_123_629_998_593f64.exp() - 1.0) / (1f64.exp() - 0.25f64.exp());
        assert_abs_diff_eq!(opt.raw, expected, epsilon = 1e-12);
        assert!(opt.was_clamped() && opt.delta0 < 0.5 && opt.delta0 > 0.4999);
        assert!(optimal_delta0(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(optimal_delta0(2.0, 1.0, 1e9, 2.0).unwrap().raw < 1e-8);
    }

    #[test]
    fn optimal_delta0_equalizes_arms() {
        let opt = optimal_delta0(6.0, 2.0, 3.0, 4.0).unwrap();
        assert!(!opt.was_clamped());
        let arms = ptr_rdp_arms(&cfg(6.0, 2.0, 3.0, opt.delta0), 4.0).unwrap();
        assert!((arms.mixture - arms.composed).abs() < 1e-9, "{arms:?}");
    }

    #[test]
    fn conversion_gaussian_classic() {
        // dense grid so the minimizer lands near 5.7985
        let alphas: Vec<f64> = (1..=20000).map(|k| 1.0 + k as f64 * 1e-3).collect();
        let curve = RdpCurve::from_fn(&alphas, |a| Ok(a / 2.0)).unwrap();
        let c = rdp_to_dp(&curve, 1e-5).unwrap();
        let l = 1e5f64.ln();
        let a_star = 1.0 + (2.0 * l).sqrt();
        assert_abs_diff_eq!(c.classic_eps, a_star / 2.0 + l / (a_star - 1.0), epsilon = 1e-6);
        assert_abs_diff_eq!(c.classic_alpha, a_star, epsilon = 2e-3);
        assert!(c.guarantee.eps <= c.classic_eps);

        let c1 = rdp_to_dp(&curve, 1.0).unwrap();
        assert!(c1.guarantee.eps <= 0.5 + 1e-3);
        assert!(rdp_to_dp(&curve, 0.0).is_err());

        let zero = RdpCurve::zero(&default_alpha_grid()).unwrap();
        assert_eq!(rdp_to_dp(&zero, 1e-5).unwrap().guarantee.eps, 0.0);
    }

    #[test]
    fn composition() {
        let alphas = default_alpha_grid();
        let g = RdpCurve::from_fn(&alphas, |a| Ok(a / 8.0)).unwrap();
        let composed = compose(&vec![g.clone(); 5]).unwrap();
        for &(a, e) in composed.points() {
            assert_abs_diff_eq!(e, 5.0 * a / 8.0, epsilon = 1e-12);
        }
        assert_eq!(compose(&[g.clone()]).unwrap(), g);
        let other = RdpCurve::from_fn(&alphas[..10], |a| Ok(a)).unwrap();
        assert!(matches!(compose(&[g, other]), Err(PtrError::GridMismatch { .. })));
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn strong_composition_cases() {
        let g = strong_composition(0.3, 1e-6, 1, 1e-6).unwrap();
        assert!(g.eps <= 0.3);
        assert_abs_diff_eq!(g.delta, 2e-6, epsilon = 1e-18);
        assert_eq!(strong_composition(0.0, 1e-6, 500, 1e-6).unwrap().eps, 0.0);
        let g = strong_composition(0.1, 1e-7, 100, 1e-6).unwrap();
        assert!(g.eps < 10.0, "{}", g.eps);
        assert!(strong_composition(0.1, 1e-7, 0, 1e-6).is_err());
    }
}
