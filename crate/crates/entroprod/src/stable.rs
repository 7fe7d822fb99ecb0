//! Log-space scalar kernels.
//!
//! Thermal weights at low temperature overflow `cosh`/`sinh` and saturate
//! `tanh` long before the physics diverges. Everything downstream therefore
//! goes through these helpers, which stay accurate for arguments up to
//! `|x| ~ 1e300`.

use std::f64::consts::LN_2;

/// ln cosh(x), safe for large |x|.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// ln sinh(x) for x > 0, safe for large x.
pub fn ln_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x + (-(-2.0 * x).exp()).ln_1p() - LN_2
}

/// ln(1 + e^x) without overflow.
pub fn ln_1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(cosh x + c sinh x) for |c| <= 1.
///
/// The argument equals (e^x (1+c) + e^{-x} (1-c))/2, which is positive and
/// free of cancellation for every |c| <= 1.
pub fn ln_cosh_mix(x: f64, c: f64) -> f64 {
    debug_assert!(c.abs() <= 1.0 + 1e-12);
    if x >= 0.0 {
        x + ((1.0 + c) + (-2.0 * x).exp() * (1.0 - c)).ln() - LN_2
    } else {
        -x + ((1.0 - c) + (2.0 * x).exp() * (1.0 + c)).ln() - LN_2
    }
}

/// ln[(1 + c tanh x)/(1 - c tanh x)] = 2 atanh(c tanh x), stable where
/// tanh saturates. Equals 2x exactly at c = 1.
pub fn ln_tanh_ratio(x: f64, c: f64) -> f64 {
    ln_cosh_mix(x, c) - ln_cosh_mix(x, -c)
}

/// Same as [`ln_tanh_ratio`] but parameterized by one_plus = 1 + c and
/// one_minus = 1 - c supplied exactly by the caller. Forming 1 -+ c from a
/// rounded c near +-1 loses the small difference entirely, and at large x
/// the result is exponentially sensitive to it.
pub fn ln_tanh_ratio_pm(x: f64, one_plus: f64, one_minus: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let e = (-2.0 * x).exp();
    (one_plus + e * one_minus).ln() - (one_minus + e * one_plus).ln()
}

/// ln(1 + sinh^2(x) s^2) without overflowing sinh^2.
pub fn ln_1p_sinh2(x: f64, s: f64) -> f64 {
    if s == 0.0 || x == 0.0 {
        return 0.0;
    }
    let l = 2.0 * s.abs().ln() + 2.0 * ln_sinh(x.abs());
    ln_1p_exp(l)
}

/// log(sum exp(x_i)) with the usual max shift; -inf entries are skipped.
/// Returns -inf for an empty (or all -inf) input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs
        .iter()
        .filter(|x| x.is_finite())
        .map(|x| (x - m).exp())
        .sum();
    m + s.ln()
}

/// (p - q)/(ln p - ln q), continued by p at coincidence and 0 when either
/// argument vanishes. This is the integral of p^t q^{1-t} over t in [0, 1].
pub fn log_mean(p: f64, q: f64) -> f64 {
    if p <= 0.0 || q <= 0.0 {
        return 0.0;
    }
    let delta = q / p - 1.0;
    if delta.abs() < 1e-5 {
        // pd/ln(1+d) expanded around d = 0
        p * (1.0 + delta * (0.5 - delta / 12.0))
    } else {
        (p - q) / (p.ln() - q.ln())
    }
}
