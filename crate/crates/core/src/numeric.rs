//! Scalar numeric primitives: log-gamma, the regularized incomplete
//! gamma function (chi-square CDF), overflow-safe log-cosh and
//! log-sum-exp, and a bracketing bisection helper.

use crate::{Error, Result};

/// Lanczos approximation (g = 7, n = 9), |error| < 1e-13 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    #[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// Lentz continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 || x < 0.0 {
        return Err(Error::Domain(format!("gamma_p(a={a}, x={x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lg = ln_gamma(a);
    let log_prefix = a * x.ln() - x - lg;
    if log_prefix < -745.0 {
        return Ok(if x < a { 0.0 } else { 1.0 });
    }
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    if x < a + 1.0 {
        // series: P(a,x) = prefix * sum_{n>=0} x^n / (a(a+1)...(a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        Ok((log_prefix.exp() * sum).min(1.0))
    } else {
        // continued fraction for Q(a,x), modified Lentz
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        Ok(1.0 - (log_prefix.exp() * h).min(1.0))
    }
}

/// CDF of the chi-square distribution with `m` degrees of freedom.
pub fn chi2_cdf(m: u32, x: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("chi2_cdf: m must be >= 1".into()));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("chi2_cdf: x = {x} < 0")));
    }
    gamma_p(m as f64 / 2.0, x / 2.0)
}

/// log(cosh(x)) without overflow: |x| + log((1 + e^{-2|x|}) / 2).
pub fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

/// log(sum_i exp(v_i)) over a slice, stable against overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// log of the arithmetic mean of exp(v_i).
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

/// Finds the root of an increasing function on [lo, hi] by bisection.
/// The bracket must satisfy f(lo) <= target <= f(hi).
pub fn bisect_increasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol: f64,
) -> Result<f64> {
    if f(lo) > target || f(hi) < target {
        return Err(Error::Domain(format!(
            "bisect_increasing: target {target} not bracketed by [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at floating-point resolution
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
