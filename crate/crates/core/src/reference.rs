//! The reference marginal `L_n`: exact for small `n`, otherwise simulated by
//! rejection sampling from the uniform law on `Pi_n`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circumradius, exact_moments, marginal_density_exact_with_limit, DEFAULT_N_MAX};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_GRID: usize = 1000;
/// Highest central moment order stored in a reference.
pub const MAX_MOMENT_ORDER: usize = 10;
const HIST_BINS: usize = 200;
const CHUNK_DRAWS: u64 = 2048;

/// Rejection sampler for the uniform distribution on `Pi_n`.
#[derive(Debug, Clone)]
pub struct UniformSampler {
    n: usize,
    generator_partial: Vec<f64>,
    radius2: f64,
    /// Candidates proposed so far.
    pub attempts: u64,
    /// Candidates accepted so far.
    pub accepted: u64,
}

impl UniformSampler {
    pub fn new(n: usize) -> Result<Self> {
        let r = circumradius(n)?;
        let step = 1.0 / (n - 1) as f64;
        let mut acc = 0.0;
        let generator_partial = (0..n)
            .map(|i| {
                acc += (n - 1 - i) as f64 * step;
                acc
            })
            .collect();
        Ok(Self {
            n,
            generator_partial,
            radius2: r * r * (1.0 + 1e-12),
            attempts: 0,
            accepted: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws one point into `out`, looping until a candidate is accepted.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Vec<f64>) {
        let n = self.n;
        let half = n as f64 / 2.0;
        out.clear();
        out.resize(n, 0.0);
        loop {
            self.attempts += 1;
            let mut sum = 0.0;
            for v in out.iter_mut().take(n - 1) {
                *v = rng.random::<f64>();
                sum += *v;
            }
            let last = half - sum;
            if !(0.0..=1.0).contains(&last) {
                continue;
            }
            out[n - 1] = last;
            if !self.prefilter(out) {
                continue;
            }
            if self.majorized(out) {
                self.accepted += 1;
                return;
            }
        }
    }

    /// Circumradius test: points outside the circumscribed ball cannot lie in
    /// `Pi_n`.
    pub fn prefilter(&self, point: &[f64]) -> bool {
        let d2: f64 = point.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
        d2 <= self.radius2
    }

    /// Majorization test for a point already on the plane `sum = n/2`.
    pub fn majorized(&self, point: &[f64]) -> bool {
        let mut sorted = point.to_vec();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut lhs = 0.0;
        for (k, v) in sorted.iter().take(self.n - 1).enumerate() {
            lhs += v;
            if lhs > self.generator_partial[k] + 1e-12 {
                return false;
            }
        }
        true
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.attempts as f64
    }
}

/// One uniform point on `Pi_n`.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut sampler = UniformSampler::new(n)?;
    let mut out = Vec::with_capacity(n);
    sampler.sample_into(rng, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReferenceSource {
    Exact,
    Simulated { draws: u64, seed: u64 },
}

/// Tabulated marginal reference `L_n`, its density and central moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReference {
    pub n: usize,
    pub grid: Vec<f64>,
    pub cdf_values: Vec<f64>,
    pub density_values: Vec<f64>,
    /// `m_{k,n}` for `k = 2..=MAX_MOMENT_ORDER`.
    pub central_moments: Vec<f64>,
    /// Monte Carlo standard errors of `central_moments` (zero when exact).
    pub moment_std_errors: Vec<f64>,
    pub source: ReferenceSource,
}

impl MarginalReference {
    pub fn grid_size(&self) -> usize {
        self.grid.len() - 1
    }

    /// Central moment `m_{order,n}`.
    pub fn moment(&self, order: usize) -> Result<f64> {
        if !(2..=MAX_MOMENT_ORDER).contains(&order) {
            return Err(Error::MomentOrder {
                order,
                available: MAX_MOMENT_ORDER,
            });
        }
        Ok(self.central_moments[order - 2])
    }

    /// `L_n(v)` by linear interpolation; `v` outside `[0, 1]` is clamped.
    pub fn cdf(&self, v: f64) -> f64 {
        cdf_lookup(self, v).0
    }
}

/// Linear interpolation of `L_n`; the flag reports whether `v` was clamped.
pub fn cdf_lookup(reference: &MarginalReference, v: f64) -> (f64, bool) {
    let clamped = !(0.0..=1.0).contains(&v);
    let v = if v.is_nan() { 0.5 } else { v.clamp(0.0, 1.0) };
    let g = reference.grid_size();
    let pos = v * g as f64;
    let i = (pos.floor() as usize).min(g - 1);
    let t = pos - i as f64;
    let c = &reference.cdf_values;
    let val = c[i] + t * (c[i + 1] - c[i]);
    (val.clamp(0.0, 1.0), clamped)
}

fn grid_points(grid_size: usize) -> Vec<f64> {
    (0..=grid_size).map(|i| i as f64 / grid_size as f64).collect()
}

/// Default simulation budget: enough draws to fill the grid and keep the
/// pooled moment error small without an `O(n^2)` blow-up.
pub fn default_draws(n: usize, grid_size: usize) -> u64 {
    (10 * grid_size as u64).max(2_000_000 / n.max(1) as u64)
}

/// Builds `L_n`: exact when `n <= DEFAULT_N_MAX`, simulated otherwise.
pub fn build_reference(n: usize, draws: u64, grid_size: usize, seed: u64) -> Result<MarginalReference> {
    build_reference_with_limit(n, draws, grid_size, seed, DEFAULT_N_MAX)
}

pub fn build_reference_with_limit(
    n: usize,
    draws: u64,
    grid_size: usize,
    seed: u64,
    n_max: usize,
) -> Result<MarginalReference> {
    if grid_size < 2 {
        return Err(Error::domain(format!("grid size must be >= 2, got {grid_size}")));
    }
    if n < 2 {
        return Err(Error::domain(format!("reference needs n >= 2, got {n}")));
    }
    if n <= n_max {
        exact_reference(n, grid_size, n_max)
    } else {
        simulate_reference(n, draws, grid_size, seed)
    }
}

fn exact_reference(n: usize, grid_size: usize, n_max: usize) -> Result<MarginalReference> {
    let density = marginal_density_exact_with_limit(n, n_max)?;
    let grid = grid_points(grid_size);
    let mut cdf_values: Vec<f64> = grid.iter().map(|&u| density.cdf(u)).collect();
    cdf_values[0] = 0.0;
    cdf_values[grid_size] = 1.0;
    for i in 1..=grid_size {
        cdf_values[i] = cdf_values[i].max(cdf_values[i - 1]);
    }
    let density_values = grid.iter().map(|&u| density.eval(u)).collect();
    let orders: Vec<usize> = (2..=MAX_MOMENT_ORDER).collect();
    let central_moments = exact_moments(&density, &orders)?;
    Ok(MarginalReference {
        n,
        grid,
        cdf_values,
        density_values,
        central_moments,
        moment_std_errors: vec![0.0; orders.len()],
        source: ReferenceSource::Exact,
    })
}

const N_ORDERS: usize = MAX_MOMENT_ORDER - 1;

struct ChunkStats {
    grid_counts: Vec<u64>,
    hist: Vec<u64>,
    sum_d: [f64; N_ORDERS],
    sum_d2: [f64; N_ORDERS],
}

fn run_chunk(n: usize, seed: u64, chunk: u64, draws: u64, grid_size: usize) -> Result<ChunkStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut sampler = UniformSampler::new(n)?;
    let mut stats = ChunkStats {
        grid_counts: vec![0; grid_size],
        hist: vec![0; HIST_BINS],
        sum_d: [0.0; N_ORDERS],
        sum_d2: [0.0; N_ORDERS],
    };
    let mut point = Vec::with_capacity(n);
    for _ in 0..draws {
        sampler.sample_into(&mut rng, &mut point);
        let mut d = [0.0; N_ORDERS];
        for &v in &point {
            stats.grid_counts[((v * grid_size as f64) as usize).min(grid_size - 1)] += 1;
            stats.hist[((v * HIST_BINS as f64) as usize).min(HIST_BINS - 1)] += 1;
            let c = v - 0.5;
            let mut p = c;
            for dk in d.iter_mut() {
                p *= c;
                *dk += p;
            }
        }
        for k in 0..N_ORDERS {
            let dk = d[k] / n as f64;
            stats.sum_d[k] += dk;
            stats.sum_d2[k] += dk * dk;
        }
    }
    Ok(stats)
}

fn simulate_reference(n: usize, draws: u64, grid_size: usize, seed: u64) -> Result<MarginalReference> {
    if draws < 10 * grid_size as u64 {
        return Err(Error::domain(format!(
            "draws must be >= 10 x grid size ({}), got {draws}",
            10 * grid_size
        )));
    }
    let chunks = draws.div_ceil(CHUNK_DRAWS);
    let parts: Vec<ChunkStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_DRAWS.min(draws - c * CHUNK_DRAWS);
            run_chunk(n, seed, c, len, grid_size)
        })
        .collect::<Result<_>>()?;

    let mut grid_counts = vec![0u64; grid_size];
    let mut hist = vec![0u64; HIST_BINS];
    let mut sum_d = [0.0; N_ORDERS];
    let mut sum_d2 = [0.0; N_ORDERS];
    for part in &parts {
        for (a, b) in grid_counts.iter_mut().zip(&part.grid_counts) {
            *a += b;
        }
        for (a, b) in hist.iter_mut().zip(&part.hist) {
            *a += b;
        }
        for k in 0..N_ORDERS {
            sum_d[k] += part.sum_d[k];
            sum_d2[k] += part.sum_d2[k];
        }
    }

    // Pool each value with its reflection 1 - v: the law is symmetric about
    // 1/2, so this halves the noise and makes L(u) + L(1-u) = 1 exactly.
    let total = 2 * grid_counts.iter().sum::<u64>();
    let mut cdf_values = Vec::with_capacity(grid_size + 1);
    let mut below = 0u64;
    let mut above = 0u64;
    cdf_values.push(0.0);
    for g in 0..grid_size {
        below += grid_counts[g];
        above += grid_counts[grid_size - 1 - g];
        cdf_values.push((below + above) as f64 / total as f64);
    }
    cdf_values[grid_size] = 1.0;

    let bin_width = 1.0 / HIST_BINS as f64;
    let sym_hist: Vec<f64> = (0..HIST_BINS)
        .map(|i| (hist[i] + hist[HIST_BINS - 1 - i]) as f64 / (total as f64 * bin_width))
        .collect();
    let grid = grid_points(grid_size);
    let density_values = grid
        .iter()
        .map(|&u| sym_hist[((u * HIST_BINS as f64) as usize).min(HIST_BINS - 1)])
        .collect();

    let d = draws as f64;
    let mut central_moments = Vec::with_capacity(N_ORDERS);
    let mut moment_std_errors = Vec::with_capacity(N_ORDERS);
    for k in 0..N_ORDERS {
        let order = k + 2;
        if order % 2 == 1 {
            central_moments.push(0.0);
            moment_std_errors.push(0.0);
            continue;
        }
        let mean = sum_d[k] / d;
        let var = ((sum_d2[k] / d - mean * mean) * d / (d - 1.0)).max(0.0);
        central_moments.push(mean);
        moment_std_errors.push((var / d).sqrt());
    }
    Ok(MarginalReference {
        n,
        grid,
        cdf_values,
        density_values,
        central_moments,
        moment_std_errors,
        source: ReferenceSource::Simulated { draws, seed },
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    format_version: u32,
    n: usize,
    grid_size: usize,
    draws: Option<u64>,
    seed: Option<u64>,
    source: ReferenceSource,
    cdf_values: Vec<f64>,
    density_values: Vec<f64>,
    central_moments: Vec<f64>,
    moment_std_errors: Vec<f64>,
}

pub fn save_reference(reference: &MarginalReference, path: &Path) -> Result<()> {
    let (draws, seed) = match reference.source {
        ReferenceSource::Exact => (None, None),
        ReferenceSource::Simulated { draws, seed } => (Some(draws), Some(seed)),
    };
    let file = CacheFile {
        format_version: FORMAT_VERSION,
        n: reference.n,
        grid_size: reference.grid_size(),
        draws,
        seed,
        source: reference.source,
        cdf_values: reference.cdf_values.clone(),
        density_values: reference.density_values.clone(),
        central_moments: reference.central_moments.clone(),
        moment_std_errors: reference.moment_std_errors.clone(),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_reference(path: &Path) -> Result<MarginalReference> {
    let file: CacheFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let bad = |msg: String| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg,
    };
    if file.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.cdf_values.len() != file.grid_size + 1 || file.density_values.len() != file.grid_size + 1 {
        return Err(bad("table lengths do not match grid size".into()));
    }
    if file.central_moments.len() != N_ORDERS {
        return Err(bad("wrong number of central moments".into()));
    }
    Ok(MarginalReference {
        n: file.n,
        grid: grid_points(file.grid_size),
        cdf_values: file.cdf_values,
        density_values: file.density_values,
        moment_std_errors: if file.moment_std_errors.len() == N_ORDERS {
            file.moment_std_errors
        } else {
            vec![0.0; N_ORDERS]
        },
        central_moments: file.central_moments,
        source: file.source,
    })
}

/// Cache file name for a build configuration.
pub fn cache_file_name(n: usize, draws: u64, grid_size: usize, seed: u64) -> String {
    if n <= DEFAULT_N_MAX {
        format!("ref_n{n}_exact_g{grid_size}_v{FORMAT_VERSION}.json")
    } else {
        format!("ref_n{n}_d{draws}_g{grid_size}_s{seed}_v{FORMAT_VERSION}.json")
    }
}

/// Loads the reference from `dir` if cached, otherwise builds and stores it.
pub fn load_or_build(dir: &Path, n: usize, draws: u64, grid_size: usize, seed: u64) -> Result<MarginalReference> {
    let path: PathBuf = dir.join(cache_file_name(n, draws, grid_size, seed));
    if path.exists() {
        if let Ok(r) = load_reference(&path) {
            if r.n == n && r.grid_size() == grid_size {
                return Ok(r);
            }
        }
    }
    let r = build_reference(n, draws, grid_size, seed)?;
    save_reference(&r, &path)?;
    Ok(r)
}

/// `log10(m0 - m_hat) = alpha + beta log10 n` with `m0 = 2^-k / (k + 1)` the
/// uniform moment of order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub order: usize,
    pub alpha: f64,
    pub beta: f64,
    pub subsample_min_n: usize,
}

pub fn uniform_central_moment(order: usize) -> f64 {
    if order % 2 == 1 {
        return 0.0;
    }
    0.5f64.powi(order as i32) / (order as f64 + 1.0)
}

pub fn rate_regression(table: &[(usize, f64)], order: usize, min_n: usize) -> Result<RateFit> {
    if order < 2 || order % 2 == 1 {
        return Err(Error::domain(format!("rate regression needs an even order >= 2, got {order}")));
    }
    let m0 = uniform_central_moment(order);
    let pts: Vec<(f64, f64)> = table
        .iter()
        .filter(|(n, _)| *n >= min_n)
        .map(|&(n, m)| {
            if !(m < m0) {
                return Err(Error::domain(format!(
                    "moment {m} at n = {n} is not below the uniform value {m0}"
                )));
            }
            Ok(((n as f64).log10(), (m0 - m).log10()))
        })
        .collect::<Result<_>>()?;
    if pts.len() < 3 {
        return Err(Error::domain(format!(
            "rate regression needs at least 3 points with n >= {min_n}, got {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("rate regression needs at least two distinct n"));
    }
    let beta = sxy / sxx;
    Ok(RateFit {
        order,
        alpha: my - beta * mx,
        beta,
        subsample_min_n: min_n,
    })
}
