//! One-dimensional bandwidth search over a criterion profile, the selection
//! methods built on it, and the closed-form Gaussian second-moment selector.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{
    anderson_darling, anderson_darling_clamped, cue_objective, cvm_beta, neyman_statistic, sarda_cv_from_pits,
    CvMWeight, TransformedPits, DEFAULT_EPS,
};
use crate::kernel::{gaussian_var_v1, loo_pits_fast, Kernel, Sample};
use crate::mixtures::golden_section;
use crate::reference::MarginalReference;

pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Bandwidth selection methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Anderson-Darling with trimming `eps`.
    Ad { eps: f64 },
    /// Beta-weighted CvM with `alpha = beta`; `alpha = 0` is Anderson-Darling.
    Cvm { alpha: f64, eps: f64 },
    /// Neyman smooth statistic on the first `r` polynomials.
    Ns { r: usize },
    /// CUE objective of the moment conditions `j = 2..=r`.
    Cue { r: usize },
    /// Gaussian closed form matching `Var V_1` to `m_{2,n}`.
    M2Gaussian,
    /// Sarda's cross-validation.
    CvSarda,
}

impl Method {
    /// Whether the method needs the reference `L_n`.
    pub fn needs_reference(&self) -> bool {
        !matches!(self, Method::CvSarda)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ad { eps } => write!(f, "ad:{eps}"),
            Method::Cvm { alpha, eps } => write!(f, "cvm:{alpha}:{eps}"),
            Method::Ns { r } => write!(f, "ns:{r}"),
            Method::Cue { r } => write!(f, "cue:{r}"),
            Method::M2Gaussian => f.write_str("m2"),
            Method::CvSarda => f.write_str("cv"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `ad`, `ad:EPS`, `cvm:ALPHA:EPS`, `ns:R` (or `nsR`), `cue:R`
    /// (or `cueR`), `m2` and `cv`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMethod(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(':').collect();
        let num = |p: &str| p.parse::<f64>().map_err(|_| unknown());
        let int = |p: &str| p.parse::<usize>().map_err(|_| unknown());
        let method = match parts.as_slice() {
            ["ad"] => Method::Ad { eps: DEFAULT_EPS },
            ["ad", e] => Method::Ad { eps: num(e)? },
            ["cvm", a] => Method::Cvm {
                alpha: num(a)?,
                eps: DEFAULT_EPS,
            },
            ["cvm", a, e] => Method::Cvm {
                alpha: num(a)?,
                eps: num(e)?,
            },
            ["ns", r] => Method::Ns { r: int(r)? },
            ["cue", r] => Method::Cue { r: int(r)? },
            ["m2"] | ["m2_gaussian"] => Method::M2Gaussian,
            ["cv"] | ["cv_sarda"] => Method::CvSarda,
            [single] if single.starts_with("ns") => Method::Ns { r: int(&single[2..])? },
            [single] if single.starts_with("cue") => Method::Cue { r: int(&single[3..])? },
            _ => return Err(unknown()),
        };
        match method {
            Method::Ad { eps } | Method::Cvm { eps, .. } if !(0.0..0.5).contains(&eps) => Err(Error::domain(format!(
                "trimming must satisfy 0 <= eps < 1/2, got {eps}"
            ))),
            Method::Cvm { alpha, .. } if !(alpha >= 0.0) => {
                Err(Error::domain(format!("CvM alpha must be >= 0, got {alpha}")))
            }
            Method::Ns { r } if r == 0 || r > crate::gof::MAX_LEGENDRE_ORDER => {
                Err(Error::domain(format!("Neyman order must be in 1..=20, got {r}")))
            }
            Method::Cue { r } if !(2..=crate::reference::MAX_MOMENT_ORDER).contains(&r) => {
                Err(Error::domain(format!("CUE order must be in 2..=10, got {r}")))
            }
            m => Ok(m),
        }
    }
}

/// Outcome of a bandwidth search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    pub b: f64,
    pub method: String,
    pub objective_value: f64,
    /// Every refined local minimum of the scanned profile, ascending in `b`.
    pub all_local_minima: Vec<(f64, f64)>,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    /// The global minimum sits at the lower edge of the bracket.
    pub edge_minimum: bool,
    /// Best interior local minimum when `edge_minimum` is set.
    pub interior_alternative: Option<(f64, f64)>,
    pub flags: Vec<String>,
}

/// Criterion values on `grid`, which must be positive and strictly
/// increasing.
pub fn profile<F>(criterion: F, grid: &[f64]) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> f64 + Sync,
{
    if grid.is_empty() {
        return Err(Error::domain("profile grid is empty"));
    }
    if grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("profile grid must be positive and strictly increasing"));
    }
    Ok(grid.par_iter().map(|&b| (b, criterion(b))).collect())
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, z) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                (a + (z - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Grid scan on a log scale, then golden-section refinement of every local
/// minimum. Non-finite criterion values count as `+inf`.
pub fn minimize<F>(criterion: F, bracket: (f64, f64), grid_points: usize, tol: f64) -> Result<BandwidthEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain(format!("invalid bracket ({lo}, {hi})")));
    }
    if grid_points < 16 {
        return Err(Error::domain(format!("need at least 16 grid points, got {grid_points}")));
    }
    let grid = log_grid(lo, hi, grid_points);
    let values: Vec<f64> = profile(&criterion, &grid)?
        .into_iter()
        .map(|(_, v)| if v.is_finite() { v } else { f64::INFINITY })
        .collect();
    let bad = values.iter().filter(|v| v.is_infinite()).count();
    if 2 * bad > grid_points {
        return Err(Error::NonFiniteCriterion {
            bad,
            total: grid_points,
        });
    }
    let mut evaluations = grid_points;
    let f = |b: f64| {
        let v = criterion(b);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Plateaus count as one minimum, represented by their first index.
    let m = grid_points;
    let mut minima_idx = Vec::new();
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] > values[i];
        let right_ok = j + 1 == m || values[j + 1] > values[i];
        if left_ok && right_ok && values[i].is_finite() {
            minima_idx.push(i);
        }
        i = j + 1;
    }

    let log_tol = tol.max(1e-12);
    let mut minima = Vec::with_capacity(minima_idx.len());
    for &k in &minima_idx {
        let a = grid[k.saturating_sub(1)].ln();
        let z = grid[(k + 1).min(m - 1)].ln();
        let count = std::cell::Cell::new(0usize);
        let t = golden_section(
            |t| {
                count.set(count.get() + 1);
                f(t.exp())
            },
            a,
            z,
            log_tol,
        );
        evaluations += count.get() + 1;
        let cand = t.exp().clamp(lo, hi);
        let v = f(cand);
        if v < values[k] {
            minima.push((cand, v));
        } else {
            minima.push((grid[k], values[k]));
        }
    }
    let (best_idx, &(b, objective_value)) = minima
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .expect("a finite grid value always yields a minimum");
    let edge_minimum = minima_idx[best_idx] == 0;
    let upper_edge = minima_idx[best_idx] == m - 1;
    let interior_alternative = if edge_minimum {
        minima
            .iter()
            .zip(&minima_idx)
            .filter(|(_, &k)| k != 0 && k != m - 1)
            .map(|(p, _)| *p)
            .min_by(|x, y| x.1.total_cmp(&y.1))
    } else {
        None
    };
    let mut flags = Vec::new();
    if edge_minimum {
        flags.push("edge_minimum".to_string());
    }
    if upper_edge && !edge_minimum {
        flags.push("upper_edge_minimum".to_string());
    }
    if minima.len() > 1 {
        flags.push("multiple_local_minima".to_string());
    }
    Ok(BandwidthEstimate {
        b,
        method: String::new(),
        objective_value,
        all_local_minima: minima,
        bracket,
        evaluations,
        edge_minimum,
        interior_alternative,
        flags,
    })
}

/// Default search bracket `[0.05 sd / n, 3 range]`.
pub fn default_bracket(sample: &Sample) -> Result<(f64, f64)> {
    let n = sample.len() as f64;
    let lo = 0.05 * sample.std_dev() / n;
    let hi = 3.0 * sample.range();
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain("sample has no spread; cannot form a bandwidth bracket"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    pub bracket: Option<(f64, f64)>,
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            bracket: None,
            grid_points: DEFAULT_GRID_POINTS,
            tol: DEFAULT_TOL,
        }
    }
}

/// The criterion of `method` evaluated at bandwidth `b`.
pub fn criterion_value(
    method: &Method,
    sample: &Sample,
    reference: Option<&MarginalReference>,
    kernel: Kernel,
    b: f64,
) -> Result<f64> {
    let pits = loo_pits_fast(sample, b, kernel)?;
    let reference = || -> Result<&MarginalReference> {
        let r = reference.ok_or_else(|| Error::domain("method needs a reference distribution"))?;
        if r.n != sample.len() {
            return Err(Error::ReferenceMismatch {
                reference: r.n,
                sample: sample.len(),
            });
        }
        Ok(r)
    };
    match *method {
        Method::Ad { eps } | Method::Cvm { alpha: 0.0, eps } => {
            let u = TransformedPits::from_pits(&pits, reference()?)?;
            if eps == 0.0 {
                Ok(anderson_darling_clamped(&u).0)
            } else {
                anderson_darling(&u, eps)
            }
        }
        Method::Cvm { alpha, eps } => {
            let u = TransformedPits::from_pits(&pits, reference()?)?;
            cvm_beta(&u, &CvMWeight::symmetric(alpha, eps)?)
        }
        Method::Ns { r } => neyman_statistic(&TransformedPits::from_pits(&pits, reference()?)?, r),
        Method::Cue { r } => cue_objective(&pits, reference()?, r),
        Method::M2Gaussian => {
            let m2 = reference()?.moment(2)?;
            let s = sample.std_dev();
            Ok((gaussian_var_v1(sample.len(), b / s)? - m2).abs())
        }
        Method::CvSarda => Ok(sarda_cv_from_pits(sample, &pits)),
    }
}

/// Selects a bandwidth for `sample` with `method`.
pub fn select(
    method: &Method,
    sample: &Sample,
    reference: Option<&MarginalReference>,
    kernel: Kernel,
    options: &SelectOptions,
) -> Result<BandwidthEstimate> {
    if sample.len() < 2 {
        return Err(Error::domain("bandwidth selection needs n >= 2"));
    }
    if method.needs_reference() {
        match reference {
            None => return Err(Error::domain("method needs a reference distribution")),
            Some(r) if r.n != sample.len() => {
                return Err(Error::ReferenceMismatch {
                    reference: r.n,
                    sample: sample.len(),
                })
            }
            _ => {}
        }
    }
    let bracket = match options.bracket {
        Some(b) => b,
        None => default_bracket(sample)?,
    };
    let mut est = if let Method::M2Gaussian = method {
        let r = reference.expect("checked above");
        let b = sample.std_dev() * m2_gaussian_bandwidth(sample.len(), r)?;
        let v = criterion_value(method, sample, reference, kernel, b)?;
        BandwidthEstimate {
            b,
            method: String::new(),
            objective_value: v,
            all_local_minima: vec![(b, v)],
            bracket,
            evaluations: 1,
            edge_minimum: false,
            interior_alternative: None,
            flags: Vec::new(),
        }
    } else {
        let crit = |b: f64| criterion_value(method, sample, reference, kernel, b).unwrap_or(f64::INFINITY);
        minimize(crit, bracket, options.grid_points, options.tol)?
    };
    est.method = method.to_string();
    Ok(est)
}

/// Root of `Var V_1(b) = m_{2,n}` for standard normal data and kernel.
pub fn m2_gaussian_bandwidth(n: usize, reference: &MarginalReference) -> Result<f64> {
    if reference.n != n {
        return Err(Error::ReferenceMismatch {
            reference: reference.n,
            sample: n,
        });
    }
    m2_gaussian_bandwidth_for_moment(n, reference.moment(2)?)
}

/// Same as [`m2_gaussian_bandwidth`] for an explicitly given `m_{2,n}`.
pub fn m2_gaussian_bandwidth_for_moment(n: usize, m2: f64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-6f64, 1e3f64);
    let g = |b: f64| gaussian_var_v1(n, b).map(|v| v - m2);
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if !(glo > 0.0 && ghi < 0.0) {
        return Err(Error::NoRoot(format!(
            "m2 = {m2} is outside the range of Var V_1 on [1e-6, 1e3] for n = {n}"
        )));
    }
    while hi / lo - 1.0 > 1e-12 {
        let mid = (lo * hi).sqrt();
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
