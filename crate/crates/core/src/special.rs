//! Normal distribution helpers and the unnormalised incomplete beta function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};


use crate::error::{Error, Result};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF through the complementary error function, which keeps
/// full relative accuracy in the lower tail.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `E|N(m, s^2)|`.
pub fn abs_normal_mean(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        return m.abs();
    }
    let z = m / s;
    2.0 * s * norm_pdf(z) + m * (1.0 - 2.0 * norm_cdf(-z))
}

/// Complete beta function `B(a, c)`.
pub fn beta(a: f64, c: f64) -> f64 {
    (libm::lgamma(a) + libm::lgamma(c) - libm::lgamma(a + c)).exp()
}

/// Unnormalised incomplete beta `B(x; a, c) = int_0^x t^(a-1) (1-t)^(c-1) dt`.
pub fn incomplete_beta(x: f64, a: f64, c: f64) -> Result<f64> {
    if !(a > 0.0) || !(c > 0.0) {
        return Err(Error::domain(format!(
            "incomplete beta needs a > 0 and c > 0 (got a = {a}, c = {c})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(beta(a, c));
    }
    if x < (a + 1.0) / (a + c + 2.0) {
        Ok(lower_cf(x, a, c))
    } else {
        Ok(beta(a, c) - lower_cf(1.0 - x, c, a))
    }
}

fn lower_cf(x: f64, a: f64, c: f64) -> f64 {
    let front = (a * x.ln() + c * (-x).ln_1p()).exp() / a;
    front * beta_cf(x, a, c)
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(x: f64, a: f64, c: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + c;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut cc = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (c - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        cc = 1.0 + aa / cc;
        if cc.abs() < TINY {
            cc = TINY;
        }
        d = 1.0 / d;
        h *= d * cc;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        cc = 1.0 + aa / cc;
        if cc.abs() < TINY {
            cc = TINY;
        }
        d = 1.0 / d;
        let del = d * cc;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `arctan` helper used by the closed-form Gaussian PIT variance.
#[inline]
pub(crate) fn arctan_over_pi(x: f64) -> f64 {
    x.atan() / PI
}
