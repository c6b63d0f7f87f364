//! Standardized Marron-Wand normal mixtures #1-#6 and exact MISE of the
//! Gaussian-kernel density and distribution function estimators.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal as Gauss;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Density, Kernel, Sample};
use crate::quadrature::integrate_real_line;
use crate::special::{abs_normal_mean, norm_cdf, norm_pdf};

/// Raw `(weight, mean, sd)` components of the Marron-Wand (1992) densities.
fn raw_components(id: usize) -> Vec<(f64, f64, f64)> {
    match id {
        1 => vec![(1.0, 0.0, 1.0)],
        2 => vec![
            (0.2, 0.0, 1.0),
            (0.2, 0.5, 2.0 / 3.0),
            (0.6, 13.0 / 12.0, 5.0 / 9.0),
        ],
        3 => (0..8)
            .map(|l| {
                let r = (2.0f64 / 3.0).powi(l);
                (0.125, 3.0 * (r - 1.0), r)
            })
            .collect(),
        4 => vec![(2.0 / 3.0, 0.0, 1.0), (1.0 / 3.0, 0.0, 0.1)],
        5 => vec![(0.1, 0.0, 1.0), (0.9, 0.0, 0.1)],
        6 => vec![(0.5, -1.0, 2.0 / 3.0), (0.5, 1.0, 2.0 / 3.0)],
        _ => unreachable!(),
    }
}

const NAMES: [&str; 6] = [
    "Gaussian",
    "Skewed unimodal",
    "Strongly skewed",
    "Kurtotic unimodal",
    "Outlier",
    "Bimodal",
];

/// A normal mixture rescaled to mean 0 and variance 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub id: usize,
    pub name: String,
    pub weights: Vec<f64>,
    /// Standardized component means.
    pub means: Vec<f64>,
    /// Standardized component standard deviations.
    pub sds: Vec<f64>,
    /// Raw mixture mean subtracted before scaling.
    pub shift: f64,
    /// Raw mixture standard deviation divided out.
    pub scale: f64,
    raw_means: Vec<f64>,
    raw_sds: Vec<f64>,
}

pub fn mixture(id: usize) -> Result<MixtureModel> {
    if !(1..=6).contains(&id) {
        return Err(Error::domain(format!("mixture id must be in 1..=6, got {id}")));
    }
    let raw = raw_components(id);
    let shift: f64 = raw.iter().map(|(w, m, _)| w * m).sum();
    let second: f64 = raw.iter().map(|(w, m, s)| w * (s * s + m * m)).sum();
    let scale = (second - shift * shift).sqrt();
    Ok(MixtureModel {
        id,
        name: NAMES[id - 1].to_string(),
        weights: raw.iter().map(|c| c.0).collect(),
        means: raw.iter().map(|c| (c.1 - shift) / scale).collect(),
        sds: raw.iter().map(|c| c.2 / scale).collect(),
        shift,
        scale,
        raw_means: raw.iter().map(|c| c.1).collect(),
        raw_sds: raw.iter().map(|c| c.2).collect(),
    })
}

impl MixtureModel {
    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| (*w, *m, *s))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components().map(|(w, m, s)| w * norm_pdf((x - m) / s) / s).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * norm_cdf((x - m) / s))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.components().map(|(w, m, _)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.components().map(|(w, m, s)| w * (s * s + m * m)).sum::<f64>() - mu * mu
    }

    /// One draw: pick a raw component by weight, draw from it, standardize.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let z: f64 = rng.sample(Gauss);
        (self.raw_means[k] + self.raw_sds[k] * z - self.shift) / self.scale
    }

    /// Location of the density maximum, by grid search and golden refinement.
    pub fn mode(&self) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=8000 {
            let x = -4.0 + i as f64 * 1e-3;
            let p = self.pdf(x);
            if p > best.0 {
                best = (p, x);
            }
        }
        golden_section(|x| -self.pdf(x), best.1 - 1e-3, best.1 + 1e-3, 1e-12)
    }
}

impl Density for MixtureModel {
    fn pdf(&self, x: f64) -> f64 {
        MixtureModel::pdf(self, x)
    }
    fn cdf(&self, x: f64) -> f64 {
        MixtureModel::cdf(self, x)
    }
}

/// `(pdf, cdf)` at `x`.
pub fn mixture_eval(model: &MixtureModel, x: f64) -> (f64, f64) {
    (model.pdf(x), model.cdf(x))
}

pub fn mixture_sample<R: Rng + ?Sized>(model: &MixtureModel, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::domain("sample size must be >= 1"));
    }
    Sample::new((0..n).map(|_| model.draw(rng)).collect())
}

fn pair_sum(model: &MixtureModel, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (wa, ma, sa) in model.components() {
        for (wb, mb, sb) in model.components() {
            total += wa * wb * f(ma - mb, sa * sa + sb * sb);
        }
    }
    total
}

fn check_mise_args(n: usize, h: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("MISE needs n >= 1"));
    }
    if !(h > 0.0) {
        return Err(Error::domain(format!("bandwidth must be > 0, got {h}")));
    }
    Ok(())
}

/// Exact MISE of the Gaussian-kernel density estimate.
pub fn mise_kde(model: &MixtureModel, n: usize, h: f64) -> Result<f64> {
    check_mise_args(n, h)?;
    let nf = n as f64;
    let omega = |a: f64| pair_sum(model, |d, v| norm_pdf(d / (a * h * h + v).sqrt()) / (a * h * h + v).sqrt());
    Ok(1.0 / (2.0 * PI.sqrt() * nf * h) + (1.0 - 1.0 / nf) * omega(2.0) - 2.0 * omega(1.0) + omega(0.0))
}

/// Exact MISE of the Gaussian-kernel distribution function estimate, from
/// `int (F_A - F_B)^2 = E|A-B| - E|A-A'|/2 - E|B-B'|/2` with `Y = X + hZ`.
pub fn mise_kdfe(model: &MixtureModel, n: usize, h: f64) -> Result<f64> {
    check_mise_args(n, h)?;
    let nf = n as f64;
    let h2 = h * h;
    let e_yy = pair_sum(model, |d, v| abs_normal_mean(d, (v + 2.0 * h2).sqrt()));
    let e_yx = pair_sum(model, |d, v| abs_normal_mean(d, (v + h2).sqrt()));
    let e_xx = pair_sum(model, |d, v| abs_normal_mean(d, v.sqrt()));
    let ivar = (0.5 * e_yy - h / PI.sqrt()) / nf;
    let isb = e_yx - 0.5 * e_yy - 0.5 * e_xx;
    Ok(ivar + isb)
}

/// MISE of the density estimate by numerical double integration.
pub fn mise_kde_numeric(model: &MixtureModel, n: usize, h: f64) -> Result<f64> {
    check_mise_args(n, h)?;
    let nf = n as f64;
    let point = |x: f64| -> f64 {
        let inner = |g: &dyn Fn(f64) -> f64| integrate_real_line(|y| g(y) * model.pdf(y), 1e-15, 1e-12).unwrap_or(f64::NAN);
        let m1 = inner(&|y| norm_pdf((x - y) / h) / h);
        let m2 = inner(&|y| (norm_pdf((x - y) / h) / h).powi(2));
        (m2 - m1 * m1) / nf + (m1 - model.pdf(x)).powi(2)
    };
    let v = integrate_real_line(point, 1e-13, 1e-10)?;
    if v.is_nan() {
        return Err(Error::Integration {
            achieved: f64::NAN,
            requested: 1e-10,
        });
    }
    Ok(v)
}

/// MISE of the distribution function estimate by numerical double
/// integration.
pub fn mise_kdfe_numeric(model: &MixtureModel, n: usize, h: f64) -> Result<f64> {
    check_mise_args(n, h)?;
    let nf = n as f64;
    let point = |x: f64| -> f64 {
        let inner = |g: &dyn Fn(f64) -> f64| integrate_real_line(|y| g(y) * model.pdf(y), 1e-15, 1e-12).unwrap_or(f64::NAN);
        let m1 = inner(&|y| norm_cdf((x - y) / h));
        let m2 = inner(&|y| norm_cdf((x - y) / h).powi(2));
        (m2 - m1 * m1) / nf + (m1 - model.cdf(x)).powi(2)
    };
    let v = integrate_real_line(point, 1e-13, 1e-10)?;
    if v.is_nan() {
        return Err(Error::Integration {
            achieved: f64::NAN,
            requested: 1e-10,
        });
    }
    Ok(v)
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol * (1.0 + c.abs()) {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

fn minimize_log(f: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = (1e-4f64.ln(), 5f64.ln());
    let m = 400;
    let step = (hi - lo) / m as f64;
    let mut best = (f64::INFINITY, 0);
    for i in 0..=m {
        let v = f((lo + i as f64 * step).exp());
        if v < best.0 {
            best = (v, i);
        }
    }
    let t = lo + best.1 as f64 * step;
    golden_section(|t| f(t.exp()), t - step, t + step, 1e-12).exp()
}

/// MISE-optimal bandwidths, as `(b_kde, b_kdfe)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiseBandwidths {
    pub b_kde: f64,
    pub b_kdfe: f64,
    pub mise_kde: f64,
    pub mise_kdfe: f64,
}

pub fn min_mise_bandwidths(model: &MixtureModel, n: usize, kernel: Kernel) -> Result<MiseBandwidths> {
    if kernel != Kernel::Gaussian {
        return Err(Error::Unsupported(format!(
            "exact MISE is only available for the gaussian kernel, got {kernel}"
        )));
    }
    check_mise_args(n, 1.0)?;
    let b_kde = minimize_log(|h| mise_kde(model, n, h).unwrap_or(f64::INFINITY));
    let b_kdfe = minimize_log(|h| mise_kdfe(model, n, h).unwrap_or(f64::INFINITY));
    Ok(MiseBandwidths {
        b_kde,
        b_kdfe,
        mise_kde: mise_kde(model, n, b_kde)?,
        mise_kdfe: mise_kdfe(model, n, b_kdfe)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_pieces;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standardization() {
        for id in 1..=6 {
            let m = mixture(id).unwrap();
            assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(m.mean().abs() < 1e-12, "id {id}");
            assert!((m.variance() - 1.0).abs() < 1e-12, "id {id}");
            let mut knots = vec![-60.0, 60.0];
            knots.extend(&m.means);
            knots.sort_by(f64::total_cmp);
            let total = integrate_pieces(|x| m.pdf(x), &knots, 1e-14, 1e-12).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "id {id}: {total}");
            assert!((m.cdf(50.0) - 1.0).abs() < 1e-15);
        }
        assert!(mixture(0).is_err());
        assert!(mixture(7).is_err());
    }

    #[test]
    fn named_shapes() {
        let m1 = mixture(1).unwrap();
        assert_eq!(m1.means, vec![0.0]);
        assert_eq!(m1.sds, vec![1.0]);
        assert!((mixture_eval(&m1, 0.0).0 - 0.398_942_280_401_432_7).abs() < 1e-15);
        let m6 = mixture(6).unwrap();
        assert_eq!(m6.weights[0], m6.weights[1]);
        assert!((m6.means[0] + m6.means[1]).abs() < 1e-15);
        let m3 = mixture(3).unwrap();
        assert!(m3.mode() < -0.5);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let (p, c) = mixture_eval(&m3, -5.0 + i as f64 * 0.01);
            assert!(p > 0.0 && c > prev);
            prev = c;
        }
    }

    #[test]
    fn cdf_derivative_is_pdf() {
        for id in 1..=6 {
            let m = mixture(id).unwrap();
            for i in 0..=80 {
                let x = -4.0 + i as f64 * 0.1;
                let d = 1e-5;
                let fd = (m.cdf(x + d) - m.cdf(x - d)) / (2.0 * d);
                assert!((fd - m.pdf(x)).abs() < 1e-6, "id {id}, x {x}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = mixture(2).unwrap();
        let a = mixture_sample(&m, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = mixture_sample(&m, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(mixture_sample(&m, 0, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }

    #[test]
    fn closed_form_mise_matches_double_integration() {
        let m = mixture(1).unwrap();
        let a = mise_kde(&m, 10, 0.5).unwrap();
        let b = mise_kde_numeric(&m, 10, 0.5).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        let a = mise_kdfe(&m, 10, 0.5).unwrap();
        let b = mise_kdfe_numeric(&m, 10, 0.5).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        let m = mixture(4).unwrap();
        let a = mise_kdfe(&m, 25, 0.2).unwrap();
        let b = mise_kdfe_numeric(&m, 25, 0.2).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn mise_needs_gaussian_kernel() {
        let m = mixture(1).unwrap();
        assert!(matches!(
            min_mise_bandwidths(&m, 100, Kernel::Epanechnikov),
            Err(Error::Unsupported(_))
        ));
    }
}
