//! Adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Used by the numeric-integration paths (`compute_xi`, the MISE
//! cross-check) and by the test oracles that check the closed-form
//! criteria against their defining integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 20_000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]` to `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if hi < lo {
        return integrate(f, hi, lo, abs_tol, rel_tol).map(|v| -v);
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, lo, hi);
    let mut total = first.value;
    let mut total_err = first.error;
    heap.push(first);
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Integration {
                achieved: total_err,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            return Err(Error::Integration {
                achieved: total_err,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let left = kronrod(&f, worst.lo, mid);
        let right = kronrod(&f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Re-sum occasionally to keep the running totals honest.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integrates `f` over the whole real line via `x = t / (1 - t^2)`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let g = |t: f64| {
        let d = 1.0 - t * t;
        if d <= 0.0 {
            return 0.0;
        }
        let x = t / d;
        let jac = (1.0 + t * t) / (d * d);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, -1.0, 1.0, abs_tol, rel_tol)
}

/// Integrates over consecutive `[knots[i], knots[i+1]]` and sums.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, knots: &[f64], abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let pieces = knots.len().saturating_sub(1).max(1) as f64;
    let mut sum = 0.0;
    for w in knots.windows(2) {
        sum += integrate(&f, w[0], w[1], abs_tol / pieces, rel_tol)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_over_real_line() {
        let v = integrate_real_line(|x| (-0.5 * x * x).exp(), 1e-13, 1e-13).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x| x.sin(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        let b = integrate(|x| x.sin(), 1.0, 0.0, 1e-13, 1e-13).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn kink_handled_by_subdivision() {
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-11);
    }
}
