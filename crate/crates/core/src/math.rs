//! Small numeric helpers shared by the analytic bounds.

/// `ln(sum(exp(x_i)))` without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// `ln(w1*exp(a) + w2*exp(b))` for nonnegative weights.
pub fn log_weighted_sum_exp(w1: f64, a: f64, w2: f64, b: f64) -> f64 {
    let mut terms = [f64::NEG_INFINITY; 2];
    if w1 > 0.0 {
        terms[0] = w1.ln() + a;
    }
    if w2 > 0.0 {
        terms[1] = w2.ln() + b;
    }
    log_sum_exp(&terms)
}

/// `ln(exp(x) - 1)` for `x >= 0`, finite for large `x`.
pub fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(n choose k)` for small nonnegative integers, by direct summation.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Formats a float with 12 significant digits in `%g` style, using a dot
/// decimal separator regardless of locale.
pub fn format_sig12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (DIGITS - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_expm1_is_continuous_and_finite() {
        assert!((ln_expm1(30.0) - 30f64.exp_m1().ln()).abs() < 1e-12);
        assert!((ln_expm1(30.0 + 1e-9) - ln_expm1(30.0)).abs() < 1e-8);
        assert_eq!(ln_expm1(1e8), 1e8);
        assert!((ln_expm1(1e-3) - 1e-3f64.exp_m1().ln()).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let direct = (1.0f64.exp() + 2.0f64.exp() + 0.5f64.exp()).ln();
        assert!((log_sum_exp(&[1.0, 2.0, 0.5]) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        // no overflow far past exp's range
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert!((ln_binomial(5, 2) - 10f64.ln()).abs() < 1e-14);
        assert_eq!(ln_binomial(7, 0), 0.0);
        assert!((ln_binomial(64, 32) - 1.832624140942590534e18f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.1), "0.1");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(2.0), "2");
        assert_eq!(format_sig12(123456.789), "123456.789");
        assert_eq!(format_sig12(1.5e-7), "1.5e-07");
        assert_eq!(format_sig12(1e-4), "0.0001");
        assert_eq!(format_sig12(9.5e-5), "9.5e-05");
        assert_eq!(format_sig12(-2.5e15), "-2.5e+15");
        assert_eq!(format_sig12(f64::INFINITY), "inf");
    }
}
