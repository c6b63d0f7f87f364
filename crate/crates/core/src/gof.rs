//! Discrepancies between the empirical law of the PITs and the reference:
//! beta-weighted Cramér-von Mises, Anderson-Darling, the Neyman smooth
//! statistic, moment deviations with their CUE objective, and Sarda's
//! cross-validation criterion.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{loo_pits, Kernel, PitVector, Sample};
use crate::reference::{cdf_lookup, MarginalReference};
use crate::special::incomplete_beta;

pub const DEFAULT_EPS: f64 = 0.001;
pub const MAX_LEGENDRE_ORDER: usize = 20;
const AD_CLAMP: f64 = 1e-12;

/// Weight `psi(t) = t^(alpha-1) (1-t)^(beta-1) 1{eps <= t <= 1-eps}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvMWeight {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
}

impl CvMWeight {
    pub fn new(alpha: f64, beta: f64, eps: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(beta >= 0.0) {
            return Err(Error::domain(format!(
                "weight exponents must be >= 0 (alpha = {alpha}, beta = {beta})"
            )));
        }
        if !(0.0..0.5).contains(&eps) {
            return Err(Error::domain(format!("trimming must satisfy 0 <= eps < 1/2, got {eps}")));
        }
        Ok(Self { alpha, beta, eps })
    }

    /// Symmetric weight `alpha = beta`.
    pub fn symmetric(alpha: f64, eps: f64) -> Result<Self> {
        Self::new(alpha, alpha, eps)
    }

    pub fn classical() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            eps: 0.0,
        }
    }

    pub fn is_anderson_darling(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    pub fn psi(&self, t: f64) -> f64 {
        if t < self.eps || t > 1.0 - self.eps {
            return 0.0;
        }
        t.powf(self.alpha - 1.0) * (1.0 - t).powf(self.beta - 1.0)
    }
}

/// Sorted transformed PITs `u_i = L_n(V_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedPits {
    u: Vec<f64>,
    /// How many inputs fell outside `[0, 1]` and were clamped by the lookup.
    pub clamped: usize,
}

impl TransformedPits {
    pub fn new(mut u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::domain("no PITs to evaluate"));
        }
        if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("transformed PIT {v} outside [0, 1]")));
        }
        u.sort_by(f64::total_cmp);
        Ok(Self { u, clamped: 0 })
    }

    /// `u_i = L_n(V_i)` through the reference table.
    pub fn from_pits(pits: &PitVector, reference: &MarginalReference) -> Result<Self> {
        if reference.n != pits.len() {
            return Err(Error::ReferenceMismatch {
                reference: reference.n,
                sample: pits.len(),
            });
        }
        let mut clamped = 0;
        let u = pits
            .v
            .iter()
            .map(|&v| {
                let (val, c) = cdf_lookup(reference, v);
                clamped += c as usize;
                val
            })
            .collect();
        let mut t = Self::new(u)?;
        t.clamped = clamped;
        Ok(t)
    }

    /// Raw PITs taken as `u` without the reference transform.
    pub fn raw(pits: &PitVector) -> Result<Self> {
        Self::new(pits.v.iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `(j_min, j_max)`, 1-based: first `u_(j) >= eps` and last `u_(j) <= 1 - eps`.
fn trim_indices(u: &[f64], eps: f64) -> (usize, usize) {
    let jmin = u.partition_point(|&x| x < eps) + 1;
    let jmax = u.partition_point(|&x| x <= 1.0 - eps);
    (jmin, jmax)
}

/// `omega^2_{alpha,beta;eps}` from the order statistics and incomplete beta
/// functions; `(0, 0)` must go through [`anderson_darling`].
pub fn cvm_beta(u: &TransformedPits, w: &CvMWeight) -> Result<f64> {
    if w.is_anderson_darling() {
        return Err(Error::UseAndersonDarling);
    }
    if w.alpha == 1.0 && w.beta == 1.0 {
        return Ok(cvm_classical(u, w.eps));
    }
    cvm_incomplete_beta(u, w)
}

fn cvm_incomplete_beta(u: &TransformedPits, w: &CvMWeight) -> Result<f64> {
    let (a, c, eps) = (w.alpha, w.beta, w.eps);
    let u = u.values();
    let n = u.len() as f64;
    let (jmin, jmax) = trim_indices(u, eps);
    let mut sum = 0.0;
    for j in jmin..=jmax {
        let x = u[j - 1];
        sum += 2.0 * incomplete_beta(x, a + 1.0, c)? - (2 * j - 1) as f64 / n * incomplete_beta(x, a, c)?;
    }
    let hi = 1.0 - eps;
    let jmx = jmax as f64 / n;
    let jmn = (jmin - 1) as f64 / n;
    let lower = |p: f64| -> Result<f64> {
        if eps == 0.0 {
            Ok(0.0)
        } else {
            incomplete_beta(eps, a + p, c)
        }
    };
    let big_a = incomplete_beta(hi, a + 2.0, c)? - lower(2.0)? - 2.0 * jmx * incomplete_beta(hi, a + 1.0, c)?
        + 2.0 * jmn * lower(1.0)?
        + jmx * jmx * incomplete_beta(hi, a, c)?
        - jmn * jmn * lower(0.0)?;
    Ok(sum / n + big_a)
}

/// Trimmed classical CvM (`alpha = beta = 1`) in polynomial form.
pub fn cvm_classical(u: &TransformedPits, eps: f64) -> f64 {
    let u = u.values();
    let nn = u.len();
    let n = nn as f64;
    let (jmin, jmax) = trim_indices(u, eps);
    let mut sum = 0.0;
    for j in jmin..=jmax {
        let d = u[j - 1] - (2 * j - 1) as f64 / (2.0 * n);
        sum += d * d;
    }
    let count = (jmax + 1).saturating_sub(jmin) as f64;
    sum / n + count / (12.0 * n * n * n) + (1.0 - eps - jmax as f64 / n).powi(3) / 3.0
        - (eps - (jmin - 1) as f64 / n).powi(3) / 3.0
}

/// Anderson-Darling `omega^2_{0,0;eps}`. With `eps = 0` every `u` must lie
/// strictly inside `(0, 1)`.
pub fn anderson_darling(u: &TransformedPits, eps: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::domain(format!("trimming must satisfy 0 <= eps < 1/2, got {eps}")));
    }
    let v = u.values();
    if eps == 0.0 {
        if v[0] <= 0.0 || v[v.len() - 1] >= 1.0 {
            return Err(Error::AdNeedsTrimming);
        }
        return Ok(ad_untrimmed(v));
    }
    Ok(ad_trimmed(v, eps))
}

/// Untrimmed Anderson-Darling with `u` clamped to `[1e-12, 1 - 1e-12]`;
/// returns the value and how many points were clamped.
pub fn anderson_darling_clamped(u: &TransformedPits) -> (f64, usize) {
    let mut count = 0;
    let v: Vec<f64> = u
        .values()
        .iter()
        .map(|&x| {
            let c = x.clamp(AD_CLAMP, 1.0 - AD_CLAMP);
            count += (c != x) as usize;
            c
        })
        .collect();
    (ad_untrimmed(&v), count)
}

fn ad_untrimmed(u: &[f64]) -> f64 {
    let nn = u.len();
    let n = nn as f64;
    let mut s = 0.0;
    for j in 1..=nn {
        s += (2 * j - 1) as f64 * (u[j - 1].ln() + (-u[nn - j]).ln_1p());
    }
    -s / (n * n) - 1.0
}

fn ad_trimmed(u: &[f64], eps: f64) -> f64 {
    let n = u.len() as f64;
    let (jmin, jmax) = trim_indices(u, eps);
    let mut s = 0.0;
    for j in jmin..=jmax {
        let x = u[j - 1];
        let l1 = (-x).ln_1p();
        s += -2.0 * l1 - (2 * j - 1) as f64 / n * (x.ln() - l1);
    }
    let jmx = jmax as f64 / n;
    let jmn = (jmin - 1) as f64 / n;
    s / n - 1.0 + 2.0 * eps + (jmx * jmx + (jmn - 1.0).powi(2)) * (-eps).ln_1p()
        - ((jmx - 1.0).powi(2) + jmn * jmn) * eps.ln()
}

/// Orthonormal shifted Legendre polynomial `rho_k(v) = sqrt(2k+1) P_k(2v-1)`.
pub fn legendre_shifted(k: usize, v: f64) -> Result<f64> {
    if k > MAX_LEGENDRE_ORDER {
        return Err(Error::domain(format!(
            "Legendre order {k} exceeds {MAX_LEGENDRE_ORDER}"
        )));
    }
    let mut out = [0.0; MAX_LEGENDRE_ORDER + 1];
    legendre_all(k, v, &mut out);
    Ok(out[k])
}

/// Fills `out[0..=k]` with `rho_0(v), ..., rho_k(v)` by the three-term
/// recurrence.
fn legendre_all(k: usize, v: f64, out: &mut [f64]) {
    let x = 2.0 * v - 1.0;
    let mut p_prev = 1.0;
    let mut p = x;
    out[0] = 1.0;
    if k >= 1 {
        out[1] = 3f64.sqrt() * x;
    }
    for m in 1..k {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0) * x * p - mf * p_prev) / (mf + 1.0);
        p_prev = p;
        p = next;
        out[m + 1] = (2.0 * mf + 3.0).sqrt() * p;
    }
}

/// `S_r = n sum_{k=1}^r (n^-1 sum_i rho_k(u_i))^2`.
pub fn neyman_statistic(u: &TransformedPits, r: usize) -> Result<f64> {
    if r == 0 || r > MAX_LEGENDRE_ORDER {
        return Err(Error::domain(format!(
            "Neyman statistic needs 1 <= r <= {MAX_LEGENDRE_ORDER}, got {r}"
        )));
    }
    let n = u.len() as f64;
    let mut sums = [0.0; MAX_LEGENDRE_ORDER + 1];
    let mut vals = [0.0; MAX_LEGENDRE_ORDER + 1];
    for &x in u.values() {
        legendre_all(r, x, &mut vals);
        for k in 1..=r {
            sums[k] += vals[k];
        }
    }
    Ok(sums[1..=r].iter().map(|s| s * s).sum::<f64>() / n)
}

fn check_reference(pits: &PitVector, reference: &MarginalReference, r: usize) -> Result<()> {
    if reference.n != pits.len() {
        return Err(Error::ReferenceMismatch {
            reference: reference.n,
            sample: pits.len(),
        });
    }
    if r < 2 {
        return Err(Error::domain(format!("moment conditions need r >= 2, got {r}")));
    }
    reference.moment(r)?;
    Ok(())
}

/// `n^-1 sum (V_i - 1/2)^j - m_{j,n}` for `j = 2..=r`.
pub fn moment_deviations(pits: &PitVector, reference: &MarginalReference, r: usize) -> Result<Vec<f64>> {
    check_reference(pits, reference, r)?;
    let n = pits.len() as f64;
    (2..=r)
        .map(|j| {
            let s: f64 = pits.v.iter().map(|v| (v - 0.5).powi(j as i32)).sum();
            Ok(s / n - reference.moment(j)?)
        })
        .collect()
}

/// Continuously-updating GMM objective `n g_bar' Omega^+ g_bar` for the
/// moment conditions `(V_i - 1/2)^j - m_{j,n}`, `j = 2..=r`, with `Omega`
/// the centred covariance of the conditions.
pub fn cue_objective(pits: &PitVector, reference: &MarginalReference, r: usize) -> Result<f64> {
    check_reference(pits, reference, r)?;
    let n = pits.len();
    if n <= r {
        return Err(Error::domain(format!("CUE needs n > r (n = {n}, r = {r})")));
    }
    let q = r - 1;
    let m: Vec<f64> = (2..=r).map(|j| reference.moment(j)).collect::<Result<_>>()?;
    let g = DMatrix::from_fn(n, q, |i, j| (pits.v[i] - 0.5).powi(j as i32 + 2) - m[j]);
    let gbar = DVector::from_fn(q, |j, _| g.column(j).mean());
    let mut centred = g.clone();
    for j in 0..q {
        let mean = gbar[j];
        centred.column_mut(j).add_scalar_mut(-mean);
    }
    let omega = centred.transpose() * &centred / n as f64;
    let eig = SymmetricEigen::new(omega);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::DegenerateMoments);
    }
    let proj = eig.eigenvectors.transpose() * &gbar;
    let mut value = 0.0;
    for (lambda, p) in eig.eigenvalues.iter().zip(proj.iter()) {
        if *lambda > 1e-10 * top {
            value += p * p / lambda;
        }
    }
    Ok(n as f64 * value)
}

/// Sarda's criterion `CV_1(b) = n^-1 sum (V_i(b) - F_n(X_i))^2`.
pub fn sarda_cv(sample: &Sample, b: f64, kernel: Kernel) -> Result<f64> {
    let pits = loo_pits(sample, b, kernel)?;
    Ok(sarda_cv_from_pits(sample, &pits))
}

pub fn sarda_cv_from_pits(sample: &Sample, pits: &PitVector) -> f64 {
    let x = sample.sorted();
    let n = x.len() as f64;
    pits.v
        .iter()
        .zip(x)
        .map(|(v, xi)| {
            let fn_x = x.partition_point(|t| t <= xi) as f64 / n;
            (v - fn_x).powi(2)
        })
        .sum::<f64>()
        / n
}
