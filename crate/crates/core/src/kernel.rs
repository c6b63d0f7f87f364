//! Kernels, kernel estimators of the density and distribution function, and
//! leave-one-out probability integral transforms.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_real_line;
use crate::special::{arctan_over_pi, norm_cdf, norm_pdf};

/// Second-order kernels. Higher-order kernels take negative values and are
/// refused at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }

    /// Kernel density `k`.
    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => norm_pdf(x),
            Kernel::Epanechnikov => {
                if x.abs() <= 1.0 {
                    0.75 * (1.0 - x * x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Integrated kernel `K`.
    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => norm_cdf(x),
            Kernel::Epanechnikov => {
                if x <= -1.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    0.5 + 0.75 * x - 0.25 * x * x * x
                }
            }
        }
    }

    /// `mu_2(k) = int x^2 k(x) dx`.
    pub fn mu2(&self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0,
            Kernel::Epanechnikov => 0.2,
        }
    }

    /// `mu_4(k) = int x^4 k(x) dx`.
    pub fn mu4(&self) -> f64 {
        match self {
            Kernel::Gaussian => 3.0,
            Kernel::Epanechnikov => 3.0 / 35.0,
        }
    }

    /// `psi_{2,1}(K) = 2 int x K(x) k(x) dx`.
    pub fn psi21(&self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0 / std::f64::consts::PI.sqrt(),
            Kernel::Epanechnikov => 9.0 / 35.0,
        }
    }

    /// Half-width beyond which `K` is 0 or 1 to double precision.
    fn support_radius(&self) -> f64 {
        match self {
            Kernel::Gaussian => 9.0,
            Kernel::Epanechnikov => 1.0,
        }
    }

    /// Scaled integrated kernel `K_b(z) = K(z / b)`; `b = 0` is the
    /// right-continuous step `1{z >= 0}`.
    #[inline]
    pub fn cdf_scaled(&self, z: f64, b: f64) -> f64 {
        if b == 0.0 {
            if z >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.cdf(z / b)
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other if is_higher_order_name(other) => Err(Error::HigherOrderKernel(s.to_string())),
            _ => Err(Error::UnknownKernel(s.to_string())),
        }
    }
}

fn is_higher_order_name(s: &str) -> bool {
    let trimmed = s.trim_end_matches(|c: char| c.is_ascii_digit() || c == '-' || c == '_');
    let order: Option<u32> = s[trimmed.len()..]
        .trim_start_matches(['-', '_'])
        .parse()
        .ok();
    matches!(trimmed, "gaussian" | "normal" | "epanechnikov") && order.is_some_and(|o| o > 2)
}

/// A univariate distribution with density and CDF, used by the expansion
/// oracles.
pub trait Density {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
}

/// The standard normal distribution.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardNormal;

impl Density for StandardNormal {
    fn pdf(&self, x: f64) -> f64 {
        norm_pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        norm_cdf(x)
    }
}

/// An immutable batch of observations, stored sorted ascending together with
/// the permutation back to input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    sorted: Vec<f64>,
    /// `order[i]` is the input position of `sorted[i]`.
    order: Vec<usize>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sample is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("observation {i} is not finite")));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted = order.iter().map(|&i| values[i]).collect();
        Ok(Self { sorted, order })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Observations in ascending order.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Observations in their original order.
    pub fn original(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (v, &i) in self.sorted.iter().zip(&self.order) {
            out[i] = *v;
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation with the `n - 1` divisor (0 for `n = 1`).
    pub fn std_dev(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn range(&self) -> f64 {
        self.sorted[self.len() - 1] - self.sorted[0]
    }
}

/// Leave-one-out PITs at bandwidth `b`, in sample-sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitVector {
    pub b: f64,
    pub v: Vec<f64>,
}

impl PitVector {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// PITs rearranged to the sample's input order.
    pub fn in_original_order(&self, sample: &Sample) -> Vec<f64> {
        let mut out = vec![0.0; self.v.len()];
        for (v, &i) in self.v.iter().zip(sample.order()) {
            out[i] = *v;
        }
        out
    }
}

fn check_bandwidth(b: f64, allow_zero: bool) -> Result<()> {
    if b.is_nan() || b < 0.0 || (!allow_zero && b == 0.0) {
        let bound = if allow_zero { ">= 0" } else { "> 0" };
        return Err(Error::domain(format!("bandwidth must be {bound}, got {b}")));
    }
    Ok(())
}

/// Kernel distribution function estimate `n^-1 sum K_b(x - X_i)`.
pub fn kdfe(sample: &Sample, b: f64, x: f64, kernel: Kernel) -> Result<f64> {
    check_bandwidth(b, true)?;
    let s: f64 = sample.sorted().iter().map(|xi| kernel.cdf_scaled(x - xi, b)).sum();
    Ok(s / sample.len() as f64)
}

/// Kernel density estimate `n^-1 sum k_b(x - X_i)`.
pub fn kde(sample: &Sample, b: f64, x: f64, kernel: Kernel) -> Result<f64> {
    check_bandwidth(b, false)?;
    let s: f64 = sample.sorted().iter().map(|xi| kernel.pdf((x - xi) / b)).sum();
    Ok(s / (sample.len() as f64 * b))
}

fn check_pit_size(sample: &Sample) -> Result<usize> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::domain(format!("leave-one-out PITs need n >= 2, got {n}")));
    }
    Ok(n)
}

/// `V_i(b) = (n-1)^-1 sum_{j != i} K_b(X_i - X_j)` by direct pairwise
/// summation.
pub fn loo_pits(sample: &Sample, b: f64, kernel: Kernel) -> Result<PitVector> {
    check_bandwidth(b, true)?;
    let n = check_pit_size(sample)?;
    let x = sample.sorted();
    let mut v = vec![0.0; n];
    if b == 0.0 {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    v[i] += kernel.cdf_scaled(x[i] - x[j], 0.0);
                }
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                let kappa = kernel.cdf((x[i] - x[j]) / b);
                v[i] += kappa;
                v[j] += 1.0 - kappa;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    v.iter_mut().for_each(|vi| *vi *= scale);
    Ok(PitVector { b, v })
}

/// Same PITs as [`loo_pits`], skipping pairs further apart than the kernel's
/// effective support (where `K` is exactly 0 or 1). On sorted data this needs
/// only binary searches outside the band, `O(n log n)` plus the pairs inside.
pub fn loo_pits_fast(sample: &Sample, b: f64, kernel: Kernel) -> Result<PitVector> {
    check_bandwidth(b, true)?;
    let n = check_pit_size(sample)?;
    if b == 0.0 {
        return loo_pits(sample, b, kernel);
    }
    let x = sample.sorted();
    let reach = kernel.support_radius() * b;
    let mut v = vec![0.0; n];
    for i in 0..n {
        let hi = x.partition_point(|&xj| xj <= x[i] + reach);
        for j in i + 1..hi {
            let kappa = kernel.cdf((x[i] - x[j]) / b);
            v[i] += kappa;
            v[j] += 1.0 - kappa;
        }
        // Pairs (j, i) with x_i - x_j > reach contribute exactly 1 to V_i.
        let far_below = x.partition_point(|&xj| xj < x[i] - reach);
        v[i] += far_below as f64;
    }
    let scale = 1.0 / (n - 1) as f64;
    v.iter_mut().for_each(|vi| *vi *= scale);
    Ok(PitVector { b, v })
}

/// The same PITs through `V_i = n/(n-1) F_hat(X_i; b) - K_b(0)/(n-1)`.
pub fn loo_pits_via_kdfe(sample: &Sample, b: f64, kernel: Kernel) -> Result<PitVector> {
    let n = check_pit_size(sample)?;
    let nf = n as f64;
    let k0 = kernel.cdf_scaled(0.0, b);
    let v = sample
        .sorted()
        .iter()
        .map(|&xi| Ok(nf / (nf - 1.0) * kdfe(sample, b, xi, kernel)? - k0 / (nf - 1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PitVector { b, v })
}

/// `(n-1) V + 1 = A (2 kappa - 1) + (n+1)/2`, with `kappa_ij = K_b(X_i - X_j)`
/// for `i < j` and the columns of `A` equal to `(e_i - e_j) / 2`.
pub fn pit_affine_representation(sample: &Sample, b: f64, kernel: Kernel) -> Result<Vec<f64>> {
    check_bandwidth(b, true)?;
    let n = check_pit_size(sample)?;
    let x = sample.sorted();
    let pairs = n * (n - 1) / 2;
    let mut a = DMatrix::<f64>::zeros(n, pairs);
    let mut kappa = DVector::<f64>::zeros(pairs);
    let mut col = 0;
    for i in 0..n {
        for j in i + 1..n {
            a[(i, col)] = 0.5;
            a[(j, col)] = -0.5;
            kappa[col] = kernel.cdf_scaled(x[i] - x[j], b);
            col += 1;
        }
    }
    let centred = kappa.map(|k| 2.0 * k - 1.0);
    let p = a * centred;
    Ok(p.iter().map(|v| v + (n as f64 + 1.0) / 2.0).collect())
}

/// PITs recovered from the affine representation.
pub fn pits_from_affine(p: &[f64]) -> Vec<f64> {
    let n = p.len() as f64;
    p.iter().map(|v| (v - 1.0) / (n - 1.0)).collect()
}

/// Four-term large-`n` approximation to `E V_j^r`.
pub fn raw_moment_expansion(r: usize, n: f64, b: f64, xi2r: f64, xi1r: f64, kernel: Kernel) -> f64 {
    let r = r as f64;
    1.0 / (r + 1.0) - 0.5 * kernel.mu2() * xi2r * b * b + (r - 1.0) / (2.0 * (r + 1.0)) / n
        - kernel.psi21() * xi1r * b / n
}

/// `xi_{2,r}(F) = r(r-1)/2 int F^(r-2) f^3` and
/// `xi_{1,r}(F) = r(r-1)/2 int F^(r-2) f^2` by adaptive quadrature.
pub fn compute_xi<D: Density + ?Sized>(dist: &D, r: usize) -> Result<(f64, f64)> {
    if r < 2 {
        return Err(Error::domain(format!("xi constants need r >= 2, got {r}")));
    }
    let c = (r * (r - 1)) as f64 / 2.0;
    let p = (r - 2) as i32;
    let xi2 = integrate_real_line(|x| dist.cdf(x).powi(p) * dist.pdf(x).powi(3), 1e-13, 1e-11)?;
    let xi1 = integrate_real_line(|x| dist.cdf(x).powi(p) * dist.pdf(x).powi(2), 1e-13, 1e-11)?;
    Ok((c * xi2, c * xi1))
}

/// Closed-form `Var V_1(b)` when both the data and the kernel are standard
/// normal.
pub fn gaussian_var_v1(n: usize, b: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("Var V_1 needs n >= 2, got {n}")));
    }
    check_bandwidth(b, true)?;
    let nf = n as f64;
    let b2 = b * b;
    let first = arctan_over_pi(((3.0 + b2) / (1.0 + b2)).sqrt());
    let second = arctan_over_pi(((4.0 + b2) / b2).sqrt());
    Ok((nf - 2.0) / (nf - 1.0) * first + second / (nf - 1.0) - 0.25)
}
