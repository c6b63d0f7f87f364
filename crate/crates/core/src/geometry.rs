//! Geometry of the rescaled regular permutohedron `Pi_n`, the exact support
//! of the leave-one-out PIT vector.
//!
//! `Pi_n` is the convex hull of all permutations of the generator
//! `(1, (n-2)/(n-1), ..., 1/(n-1), 0)`; it lies in the hyperplane
//! `sum(u) = n/2` with barycentre `(1/2, ..., 1/2)`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` for which the `n!`-term volume sums are evaluated.
pub const DEFAULT_N_MAX: usize = 9;

/// Hard ceiling for the exact path; beyond this the integer accumulators
/// used by [`ExactMarginal`] could overflow.
pub const EXACT_HARD_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutohedronSpec {
    pub n: usize,
    pub generator: Vec<f64>,
    pub plane_sum: f64,
}

impl PermutohedronSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("permutohedron needs n >= 2, got {n}")));
        }
        let step = 1.0 / (n - 1) as f64;
        let generator = (0..n).map(|i| ((n - 1 - i) as f64) * step).collect();
        Ok(Self {
            n,
            generator,
            plane_sum: n as f64 / 2.0,
        })
    }

    pub fn default_tol(&self) -> f64 {
        1e-12 * self.n as f64
    }

    /// Rado's criterion: `point` is in `Pi_n` iff it lies on the plane and is
    /// majorized by the generator.
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        if point.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: point.len(),
            });
        }
        if !(tol >= 0.0) {
            return Err(Error::domain("membership tolerance must be >= 0"));
        }
        let total: f64 = point.iter().sum();
        if (total - self.plane_sum).abs() > tol {
            return Ok(false);
        }
        let mut sorted = point.to_vec();
        // Stable sort: ties stay in encounter order.
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for k in 0..self.n - 1 {
            lhs += sorted[k];
            rhs += self.generator[k];
            if lhs > rhs + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Membership in `Pi_n` with the default tolerance `1e-12 * n`.
pub fn contains(point: &[f64], spec: &PermutohedronSpec) -> Result<bool> {
    spec.contains(point, spec.default_tol())
}

/// Distance from the barycentre of `Pi_n` to any of its vertices.
pub fn circumradius(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("circumradius needs n >= 2, got {n}")));
    }
    let n = n as f64;
    Ok((n * (n + 1.0) / (12.0 * (n - 1.0))).sqrt())
}

/// Closed-form `(n-1)`-volume of `Pi_n`: `n^(n-2) / (n-1)^(n-1)`.
pub fn volume_regular(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("volume needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(((nf - 2.0) * nf.ln() - (nf - 1.0) * (nf - 1.0).ln()).exp())
}

/// Calls `visit` with every permutation of `0..m` (Heap's algorithm).
pub(crate) fn for_each_permutation(m: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..m).collect();
    let mut c = vec![0usize; m];
    visit(&perm);
    let mut i = 1;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Volume of the permutohedron `P_n(x)` through Postnikov's permutation sum,
/// with the default limit `n <= 9`.
pub fn volume_postnikov(x: &[f64], lambdas: &[f64]) -> Result<f64> {
    volume_postnikov_with_limit(x, lambdas, DEFAULT_N_MAX)
}

pub fn volume_postnikov_with_limit(x: &[f64], lambdas: &[f64], n_max: usize) -> Result<f64> {
    let n = x.len();
    if lambdas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lambdas.len(),
        });
    }
    if n == 0 {
        return Err(Error::domain("volume of an empty permutohedron"));
    }
    if n > n_max {
        return Err(Error::ExactLimit { n, n_max });
    }
    if x.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::domain("x must be strictly decreasing"));
    }
    for i in 0..n {
        for j in i + 1..n {
            if lambdas[i] == lambdas[j] {
                return Err(Error::DegenerateLambdas);
            }
        }
    }
    if n == 1 {
        return Ok(1.0);
    }
    // Centering both vectors leaves the sum unchanged (the lower-degree
    // sums vanish) and shrinks the terms that have to cancel.
    let xm = x.iter().sum::<f64>() / n as f64;
    let lm = lambdas.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - xm).collect();
    let lc: Vec<f64> = lambdas.iter().map(|v| v - lm).collect();
    let power = (n - 1) as i32;

    let mut sum = 0.0;
    let mut comp = 0.0;
    for_each_permutation(n, |perm| {
        let mut linear = 0.0;
        let mut denom = 1.0;
        for i in 0..n {
            linear += lc[perm[i]] * xc[i];
            if i + 1 < n {
                denom *= lc[perm[i]] - lc[perm[i + 1]];
            }
        }
        let term = linear.powi(power) / denom;
        // Neumaier summation.
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    });
    Ok((sum + comp) / factorial(n - 1))
}

/// One polynomial piece of a piecewise density, coefficients ascending in `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coefficients: Vec<f64>,
}

impl Piece {
    pub fn eval(&self, u: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// `int_lo^u` of the piece.
    fn integral_to(&self, u: f64) -> f64 {
        let prim = |t: f64| {
            self.coefficients
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (p, c)| acc * t + c / (p + 1) as f64)
                * t
        };
        prim(u) - prim(self.lo)
    }
}

/// The marginal density `l_n` of one coordinate of a uniform point on `Pi_n`:
/// a degree `n-2` polynomial on each `[(j-1)/(n-1), j/(n-1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomialDensity {
    pub n: usize,
    pub pieces: Vec<Piece>,
}

impl PiecewisePolynomialDensity {
    fn piece_index(&self, u: f64) -> usize {
        let m = self.pieces.len();
        ((u * m as f64).floor() as isize).clamp(0, m as isize - 1) as usize
    }

    /// Density at `u`; zero outside `[0, 1]`.
    pub fn eval(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        self.pieces[self.piece_index(u)].eval(u)
    }

    /// `L_n(u) = int_0^u l_n`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let idx = self.piece_index(u);
        let below: f64 = self.pieces[..idx].iter().map(|p| p.integral_to(p.hi)).sum();
        below + self.pieces[idx].integral_to(u)
    }

    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.pieces.iter().map(|p| p.lo).collect();
        k.push(self.pieces.last().map_or(1.0, |p| p.hi));
        k
    }

    /// Recovers the pieces from point evaluations: `deg + 1` Chebyshev nodes
    /// per interval and a Vandermonde solve, rejected if the residual at a
    /// fresh set of check points exceeds `1e-9`.
    pub fn fit<F: Fn(usize, f64) -> f64>(n: usize, degree: usize, eval: F) -> Result<Self> {
        let m = n - 1;
        let k = degree + 1;
        let mut pieces = Vec::with_capacity(m);
        for j in 0..m {
            let lo = j as f64 / m as f64;
            let hi = (j + 1) as f64 / m as f64;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            // Solve in the local variable s in [-1, 1] for conditioning.
            let nodes: Vec<f64> = (0..k)
                .map(|i| (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * k) as f64).cos())
                .collect();
            let vand = nalgebra::DMatrix::from_fn(k, k, |r, c| nodes[r].powi(c as i32));
            let rhs = nalgebra::DVector::from_iterator(k, nodes.iter().map(|s| eval(j, mid + half * s)));
            let local = vand
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::domain("singular Vandermonde system"))?;
            // Expand sum_c local[c] ((u - mid) / half)^c into powers of u.
            let mut coeffs = vec![0.0; k];
            for (c, &lc) in local.iter().enumerate() {
                let scale = lc / half.powi(c as i32);
                for p in 0..=c {
                    coeffs[p] += scale * binomial(c, p) * (-mid).powi((c - p) as i32);
                }
            }
            let piece = Piece {
                lo,
                hi,
                coefficients: coeffs,
            };
            for i in 0..=8 {
                let u = lo + (hi - lo) * (i as f64 + 0.37) / 9.37;
                let resid = (piece.eval(u) - eval(j, u)).abs();
                if resid > 1e-9 {
                    return Err(Error::domain(format!(
                        "polynomial fit residual {resid:e} on piece {j} exceeds 1e-9"
                    )));
                }
            }
            pieces.push(piece);
        }
        Ok(Self { n, pieces })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central moments `int (u - 1/2)^k l(u) du` for each requested order,
/// integrating every polynomial piece exactly.
pub fn exact_moments(density: &PiecewisePolynomialDensity, orders: &[usize]) -> Result<Vec<f64>> {
    orders
        .iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::domain("moment orders start at 1"));
            }
            let mut total = 0.0;
            for piece in &density.pieces {
                // Re-centre the piece at 1/2: p(u) = sum_q d_q (u - 1/2)^q.
                let deg = piece.coefficients.len();
                let mut centred = vec![0.0; deg];
                for (p, &c) in piece.coefficients.iter().enumerate() {
                    for q in 0..=p {
                        centred[q] += c * binomial(p, q) * 0.5f64.powi((p - q) as i32);
                    }
                }
                let a = piece.lo - 0.5;
                let b = piece.hi - 0.5;
                for (q, &d) in centred.iter().enumerate() {
                    let e = (q + k + 1) as i32;
                    total += d * (b.powi(e) - a.powi(e)) / e as f64;
                }
            }
            Ok(total)
        })
        .collect()
}

/// Exact rational pieces of `l_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginal {
    pub n: usize,
    /// Coefficients ascending in `u` for the pieces `j = 1..n-1`.
    pub pieces: Vec<Vec<BigRational>>,
}

impl ExactMarginal {
    pub fn to_density(&self) -> PiecewisePolynomialDensity {
        let m = (self.n - 1) as f64;
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(j, coeffs)| Piece {
                lo: j as f64 / m,
                hi: (j + 1) as f64 / m,
                coefficients: coeffs.iter().map(rational_to_f64).collect(),
            })
            .collect();
        PiecewisePolynomialDensity { n: self.n, pieces }
    }

    pub fn eval(&self, u: &BigRational) -> BigRational {
        let m = BigInt::from(self.n - 1);
        let idx = (u * BigRational::from_integer(m))
            .floor()
            .to_integer()
            .to_usize()
            .unwrap_or(0)
            .min(self.pieces.len() - 1);
        self.pieces[idx]
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * u + c)
    }

    /// Exact central moment of order `k` about 1/2.
    pub fn central_moment(&self, k: usize) -> BigRational {
        let m = self.n - 1;
        let half = BigRational::new(1.into(), 2.into());
        let mut total = BigRational::zero();
        for (j, coeffs) in self.pieces.iter().enumerate() {
            let lo = BigRational::new(BigInt::from(j), BigInt::from(m));
            let hi = BigRational::new(BigInt::from(j + 1), BigInt::from(m));
            // Integrand (u - 1/2)^k * sum_p c_p u^p expanded in powers of u.
            let mut poly = coeffs.clone();
            for _ in 0..k {
                let mut next = vec![BigRational::zero(); poly.len() + 1];
                for (p, c) in poly.iter().enumerate() {
                    next[p + 1] += c;
                    next[p] -= c * &half;
                }
                poly = next;
            }
            for (p, c) in poly.iter().enumerate() {
                let e = p + 1;
                let denom = BigRational::from_integer(BigInt::from(e));
                total += c * (pow_rational(&hi, e) - pow_rational(&lo, e)) / denom;
            }
        }
        total
    }
}

fn pow_rational(x: &BigRational, e: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale to keep both parts representable before dividing.
    let num = r.numer();
    let den = r.denom();
    let shift = num.bits().max(den.bits()).saturating_sub(1000);
    let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    if d == 0.0 {
        if num.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        n / d
    }
}

/// Exact marginal density of `Pi_n` as rational piecewise polynomials.
///
/// On piece `j` the density is `(n-1)/n^(n-2)` times the `(n-2)`-volume of
/// `P_{n-1}(n-1, ..., j+1, t, j-2, ..., 0)` with `t = 2j-1-(n-1)u`. That
/// volume is a polynomial in `t`; its coefficients come out of Postnikov's
/// sum with integer `lambda_i = i`, accumulated in `i128` per distinct
/// denominator and only then combined as big rationals.
pub fn marginal_density_exact_rational(n: usize, n_max: usize) -> Result<ExactMarginal> {
    if n < 2 {
        return Err(Error::domain(format!("marginal density needs n >= 2, got {n}")));
    }
    let limit = n_max.min(EXACT_HARD_LIMIT);
    if n > limit {
        return Err(Error::ExactLimit { n, n_max: limit });
    }
    let m = n - 1; // dimension of the section permutohedron
    let mut pieces = Vec::with_capacity(m);
    let scale = BigRational::new(BigInt::from(m), BigInt::from(n).pow((n - 2) as u32));
    let fact = BigInt::from((1..m.max(1)).product::<usize>().max(1));

    for j in 1..=m {
        // Integer coordinates around the symbolic slot at position k.
        let k = m - j;
        let coords: Vec<i128> = (0..m)
            .map(|i| {
                if i < k {
                    (m - i) as i128
                } else if i == k {
                    0
                } else {
                    (m - i - 1) as i128
                }
            })
            .collect();
        let deg = m - 1;
        let mut groups: HashMap<i128, Vec<i128>> = HashMap::new();
        for_each_permutation(m, |perm| {
            let mut a: i128 = 0;
            let mut denom: i128 = 1;
            for i in 0..m {
                if i != k {
                    a += perm[i] as i128 * coords[i];
                }
                if i + 1 < m {
                    denom *= perm[i] as i128 - perm[i + 1] as i128;
                }
            }
            let mu = perm[k] as i128;
            let acc = groups.entry(denom).or_insert_with(|| vec![0; deg + 1]);
            // (a + mu t)^deg = sum_p C(deg, p) a^(deg-p) mu^p t^p; the
            // binomial factor is applied after the sum.
            let mut a_pow = vec![1i128; deg + 1];
            for p in 1..=deg {
                a_pow[p] = a_pow[p - 1] * a;
            }
            let mut mu_pow: i128 = 1;
            for p in 0..=deg {
                acc[p] += a_pow[deg - p] * mu_pow;
                mu_pow *= mu;
            }
        });
        let mut t_coeffs = vec![BigRational::zero(); deg + 1];
        for (denom, sums) in &groups {
            let d = BigInt::from(*denom);
            for p in 0..=deg {
                if sums[p] != 0 {
                    t_coeffs[p] += BigRational::new(BigInt::from(sums[p]), d.clone());
                }
            }
        }
        for (p, c) in t_coeffs.iter_mut().enumerate() {
            let binom = BigInt::from(binomial_int(deg, p));
            *c = &*c * BigRational::new(binom, fact.clone());
        }
        // Substitute t = (2j - 1) - (n - 1) u.
        let a = BigRational::from_integer(BigInt::from(2 * j as i64 - 1));
        let b = BigRational::from_integer(BigInt::from(-(m as i64)));
        let mut u_coeffs = vec![BigRational::zero(); deg + 1];
        let mut power = vec![BigRational::one()]; // (a + b u)^p
        for (p, c) in t_coeffs.iter().enumerate() {
            if p > 0 {
                let mut next = vec![BigRational::zero(); power.len() + 1];
                for (q, v) in power.iter().enumerate() {
                    next[q] += v * &a;
                    next[q + 1] += v * &b;
                }
                power = next;
            }
            for (q, v) in power.iter().enumerate() {
                u_coeffs[q] += c * v;
            }
        }
        for c in u_coeffs.iter_mut() {
            *c = &*c * &scale;
        }
        pieces.push(u_coeffs);
    }
    Ok(ExactMarginal { n, pieces })
}

fn binomial_int(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exact marginal density of `Pi_n` for `n <= n_max` (default 9).
pub fn marginal_density_exact(n: usize) -> Result<PiecewisePolynomialDensity> {
    marginal_density_exact_with_limit(n, DEFAULT_N_MAX)
}

pub fn marginal_density_exact_with_limit(n: usize, n_max: usize) -> Result<PiecewisePolynomialDensity> {
    Ok(marginal_density_exact_rational(n, n_max)?.to_density())
}

/// Floating-point evaluation of `l_n(u)` straight from the section volume,
/// independent of the rational expansion.
pub fn marginal_density_at(n: usize, u: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("marginal density needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Ok(0.0);
    }
    if n == 2 {
        return Ok(1.0);
    }
    let m = n - 1;
    let j = ((u * m as f64).floor() as usize + 1).min(m);
    let t = (2 * j - 1) as f64 - m as f64 * u;
    let x: Vec<f64> = (0..m)
        .map(|i| {
            let k = m - j;
            if i < k {
                (m - i) as f64
            } else if i == k {
                t
            } else {
                (m - i - 1) as f64
            }
        })
        .collect();
    let lambdas: Vec<f64> = (0..m).map(|i| i as f64).collect();
    let vol = volume_postnikov_with_limit(&x, &lambdas, EXACT_HARD_LIMIT)?;
    Ok(m as f64 / (n as f64).powi((n - 2) as i32) * vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn spec_generator() {
        let s = PermutohedronSpec::new(4).unwrap();
        assert_eq!(s.generator.len(), 4);
        assert!((s.generator.iter().sum::<f64>() - 2.0).abs() < 1e-15);
        assert!(PermutohedronSpec::new(1).is_err());
    }

    #[test]
    fn membership_examples() {
        let s = PermutohedronSpec::new(3).unwrap();
        assert!(contains(&[1.0, 0.5, 0.0], &s).unwrap());
        assert!(contains(&[0.5, 0.5, 0.5], &s).unwrap());
        assert!(!contains(&[1.2, 0.3, 0.0], &s).unwrap());
        assert!(contains(&[0.0, 1.0, 0.5], &s).unwrap());
        match contains(&[0.5, 0.5], &s) {
            Err(Error::DimensionMismatch { expected: 3, got: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_plane_point_is_rejected() {
        let s = PermutohedronSpec::new(3).unwrap();
        assert!(!contains(&[0.5, 0.5, 0.4], &s).unwrap());
    }

    #[test]
    fn circumradius_examples() {
        assert!((circumradius(3).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((circumradius(2).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(circumradius(1).is_err());
    }

    #[test]
    fn circumradius_n10_matches_vertex_enumeration() {
        // Brute force over all 10! vertices.
        let spec = PermutohedronSpec::new(10).unwrap();
        let mut best: f64 = 0.0;
        for_each_permutation(10, |perm| {
            let d2: f64 = perm.iter().map(|&i| (spec.generator[i] - 0.5).powi(2)).sum();
            best = best.max(d2);
        });
        assert!((best.sqrt() - circumradius(10).unwrap()).abs() < 1e-12);
        assert!((circumradius(10).unwrap() - 1.009_21).abs() < 1e-5);
    }

    #[test]
    fn postnikov_examples() {
        let v = volume_postnikov(&[1.0, 0.5, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        let v = volume_postnikov(&[1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0], &[0.3, -1.0, 2.0, 5.0]).unwrap();
        assert!((v - 16.0 / 27.0).abs() < 1e-12);
        let v = volume_postnikov(&[2.0, 1.0, 0.0], &[0.0, 1.0, 7.0]).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn postnikov_errors() {
        assert!(matches!(
            volume_postnikov(&[1.0, 0.5, 0.0], &[1.0, 1.0, 3.0]),
            Err(Error::DegenerateLambdas)
        ));
        let x: Vec<f64> = (0..10).rev().map(|i| i as f64).collect();
        let l: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            volume_postnikov(&x, &l),
            Err(Error::ExactLimit { n: 10, n_max: 9 })
        ));
    }

    #[test]
    fn regular_volume_examples() {
        assert!((volume_regular(2).unwrap() - 1.0).abs() < 1e-15);
        assert!((volume_regular(3).unwrap() - 0.75).abs() < 1e-15);
        assert!((volume_regular(6).unwrap() - 0.41472).abs() < 1e-12);
        assert!(volume_regular(1).is_err());
    }

    #[test]
    fn exact_l3_l4_pieces() {
        let l3 = marginal_density_exact_rational(3, 9).unwrap();
        assert_eq!(l3.pieces[0], vec![q(2, 3), q(4, 3)]);
        assert_eq!(l3.pieces[1], vec![q(2, 1), q(-4, 3)]);
        let l4 = marginal_density_exact_rational(4, 9).unwrap();
        let s = |v: i64| q(3 * v, 32);
        assert_eq!(l4.pieces[0], vec![s(6), s(18), s(9)]);
        assert_eq!(l4.pieces[1], vec![s(9), s(18), s(-18)]);
        assert_eq!(l4.pieces[2], vec![s(33), s(-36), s(9)]);
    }

    #[test]
    fn density_examples() {
        let l3 = marginal_density_exact(3).unwrap();
        assert!((l3.eval(0.25) - 1.0).abs() < 1e-14);
        let l4 = marginal_density_exact(4).unwrap();
        assert!((l4.eval(1.0 / 3.0) - 39.0 / 32.0).abs() < 1e-14);
        assert!((l4.pieces[0].eval(1.0 / 3.0) - l4.pieces[1].eval(1.0 / 3.0)).abs() < 1e-14);
        assert!((l4.eval(0.0) - 0.5625).abs() < 1e-15);
        assert!(marginal_density_exact(10).is_err());
    }

    #[test]
    fn endpoint_value_is_exact() {
        for n in 2..=9 {
            let l = marginal_density_exact_rational(n, 9).unwrap();
            let expected = BigRational::new(
                BigInt::from(n - 1).pow((n - 2) as u32),
                BigInt::from(n).pow((n - 2) as u32),
            );
            assert_eq!(l.eval(&BigRational::zero()), expected, "n = {n}");
            assert_eq!(l.eval(&BigRational::one()), expected, "n = {n}");
        }
    }

    #[test]
    fn exact_density_integrates_to_one_and_is_symmetric() {
        for n in 2..=9 {
            let l = marginal_density_exact(n).unwrap();
            let total = exact_moments(&l, &[1]).unwrap()[0];
            assert!(total.abs() < 1e-10, "first central moment n = {n}");
            assert!((l.cdf(1.0 - 1e-15) - 1.0).abs() < 1e-10);
            let mass: f64 = l.pieces.iter().map(|p| p.integral_to(p.hi)).sum();
            assert!((mass - 1.0).abs() < 1e-10, "n = {n}: {mass}");
            for i in 0..=200 {
                let u = i as f64 / 200.0;
                assert!((l.eval(u) - l.eval(1.0 - u)).abs() < 1e-10);
            }
            for w in l.pieces.windows(2) {
                assert!((w[0].eval(w[0].hi) - w[1].eval(w[1].lo)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments_examples() {
        let l2 = marginal_density_exact(2).unwrap();
        let m = exact_moments(&l2, &[2, 4]).unwrap();
        assert!((m[0] - 1.0 / 12.0).abs() < 1e-15);
        assert!((m[1] - 0.0125).abs() < 1e-15);
        let l3 = marginal_density_exact_rational(3, 9).unwrap();
        assert_eq!(l3.central_moment(2), q(5, 72));
        let m = exact_moments(&l3.to_density(), &[2]).unwrap();
        assert!((m[0] - 5.0 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn moments_sit_below_uniform() {
        for n in 3..=9 {
            let l = marginal_density_exact(n).unwrap();
            let m = exact_moments(&l, &[1, 2, 4, 6, 8, 10]).unwrap();
            assert!(m[0].abs() < 1e-12);
            for (i, k) in [2, 4, 6, 8, 10].iter().enumerate() {
                let uniform = 0.5f64.powi(*k as i32) / (*k as f64 + 1.0);
                assert!(m[i + 1] > 0.0 && m[i + 1] < uniform, "n = {n}, order {k}");
            }
        }
    }

    #[test]
    fn vandermonde_fit_reproduces_exact_pieces() {
        for n in 3..=8 {
            let exact = marginal_density_exact(n).unwrap();
            let fit = PiecewisePolynomialDensity::fit(n, n - 2, |_, u| marginal_density_at(n, u).unwrap()).unwrap();
            for i in 0..=100 {
                let u = i as f64 / 100.0;
                assert!((fit.eval(u) - exact.eval(u)).abs() < 1e-9, "n = {n}, u = {u}");
            }
        }
    }
}
