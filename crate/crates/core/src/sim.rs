//! Seeded Monte Carlo study of the bandwidth selectors over the standardized
//! normal mixtures, with CSV and JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{loo_pits_fast, Kernel, PitVector};
use crate::mixtures::{mixture, mixture_sample, MixtureModel};
use crate::reference::{default_draws, load_or_build, load_reference, build_reference, MarginalReference, DEFAULT_GRID};
use crate::select::{select, Method, SelectOptions};

pub const QUANTILE_LEVELS: [f64; 7] = [0.0, 0.025, 0.25, 0.5, 0.75, 0.975, 1.0];
pub const HIST_BINS: usize = 50;
/// Replications reused for the PIT histogram at the median bandwidth.
pub const HIST_REPLICATIONS: usize = 200;
/// Seed of automatically built references, fixed so that every study at a
/// given `n` shares the same table.
pub const AUTO_REFERENCE_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceSource {
    /// Build (or load from `cache_dir`) with default settings.
    Auto { cache_dir: Option<PathBuf> },
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub density_id: usize,
    pub n: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub kernel: Kernel,
    pub master_seed: u64,
    pub reference: ReferenceSource,
    pub workers: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        mixture(self.density_id)?;
        if self.replications == 0 {
            return Err(Error::domain("replications must be >= 1"));
        }
        if self.n < 2 {
            return Err(Error::domain(format!("sample size must be >= 2, got {}", self.n)));
        }
        if self.workers == 0 {
            return Err(Error::domain("workers must be >= 1"));
        }
        Ok(())
    }
}

/// Order-statistic summary; quantiles use linear interpolation between order
/// statistics (`h = (m - 1) p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub quantiles: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitHistogram {
    pub b: f64,
    /// Density-normalized counts on `HIST_BINS` equal bins of `[0, 1]`.
    pub density: Vec<f64>,
    /// `l_n` at the bin centres, when a reference was available.
    pub reference_density: Option<Vec<f64>>,
    /// Pooled `mean (V - 1/2)^2`.
    pub pooled_m2: f64,
}

impl PitHistogram {
    /// `sup |histogram - l_n|` over bin centres.
    pub fn sup_distance(&self) -> Option<f64> {
        let reference = self.reference_density.as_ref()?;
        Some(
            self.density
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    /// Selected bandwidth per replication; `None` when selection failed.
    pub draws: Vec<Option<f64>>,
    pub edge_minimum: Vec<bool>,
    pub summary: Option<Summary>,
    pub pit_histogram: Option<PitHistogram>,
}

impl MethodResult {
    pub fn failures(&self) -> usize {
        self.draws.iter().filter(|d| d.is_none()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_minimum.iter().filter(|&&e| e).count()
    }

    pub fn median(&self) -> Option<f64> {
        self.summary.as_ref().map(|s| s.quantiles[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub density_id: usize,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub methods: Vec<MethodResult>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / m;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Summary {
        quantiles: QUANTILE_LEVELS.iter().map(|&p| quantile(&sorted, p)).collect(),
        mean,
        sd,
    })
}

/// Pooled density histogram of every `V_i` across replications, with `l_n`
/// at the bin centres when a reference is given.
pub fn pit_marginal_histogram(pits: &[PitVector], reference: Option<&MarginalReference>) -> PitHistogram {
    let mut counts = vec![0u64; HIST_BINS];
    let mut total = 0u64;
    let mut m2 = 0.0;
    for p in pits {
        for &v in &p.v {
            counts[((v * HIST_BINS as f64) as usize).min(HIST_BINS - 1)] += 1;
            m2 += (v - 0.5).powi(2);
            total += 1;
        }
    }
    let width = 1.0 / HIST_BINS as f64;
    let density = counts
        .iter()
        .map(|&c| c as f64 / (total.max(1) as f64 * width))
        .collect();
    let reference_density =
        reference.map(|r| (0..HIST_BINS).map(|i| density_at(r, (i as f64 + 0.5) * width)).collect());
    PitHistogram {
        b: pits.first().map_or(f64::NAN, |p| p.b),
        density,
        reference_density,
        pooled_m2: m2 / total.max(1) as f64,
    }
}

fn density_at(reference: &MarginalReference, u: f64) -> f64 {
    let g = reference.grid_size();
    let pos = u.clamp(0.0, 1.0) * g as f64;
    let i = (pos.floor() as usize).min(g - 1);
    let t = pos - i as f64;
    let d = &reference.density_values;
    d[i] + t * (d[i + 1] - d[i])
}

fn replication_rng(master_seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication as u64);
    rng
}

/// Resolves the reference table for a study.
pub fn resolve_reference(source: &ReferenceSource, n: usize) -> Result<MarginalReference> {
    let r = match source {
        ReferenceSource::Path(p) => load_reference(p)?,
        ReferenceSource::Auto { cache_dir: Some(dir) } => {
            load_or_build(dir, n, default_draws(n, DEFAULT_GRID), DEFAULT_GRID, AUTO_REFERENCE_SEED)?
        }
        ReferenceSource::Auto { cache_dir: None } => {
            build_reference(n, default_draws(n, DEFAULT_GRID), DEFAULT_GRID, AUTO_REFERENCE_SEED)?
        }
    };
    if r.n != n {
        return Err(Error::ReferenceMismatch { reference: r.n, sample: n });
    }
    Ok(r)
}

pub fn run_simulation(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let reference = if config.methods.iter().any(Method::needs_reference) {
        Some(resolve_reference(&config.reference, config.n)?)
    } else {
        None
    };
    run_simulation_with_reference(config, reference.as_ref())
}

/// Runs the study with an already resolved reference.
pub fn run_simulation_with_reference(
    config: &SimConfig,
    reference: Option<&MarginalReference>,
) -> Result<SimResult> {
    config.validate()?;
    let model = mixture(config.density_id)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    let opts = SelectOptions::default();
    let per_rep: Vec<Vec<(Option<f64>, bool)>> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| -> Result<Vec<(Option<f64>, bool)>> {
                let mut rng = replication_rng(config.master_seed, r);
                let sample = mixture_sample(&model, config.n, &mut rng)?;
                Ok(config
                    .methods
                    .iter()
                    .map(|m| match select(m, &sample, reference, config.kernel, &opts) {
                        Ok(est) => (Some(est.b), est.edge_minimum),
                        Err(_) => (None, false),
                    })
                    .collect())
            })
            .collect::<Result<_>>()
    })?;

    let hist_reps = config.replications.min(HIST_REPLICATIONS);
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let draws: Vec<Option<f64>> = per_rep.iter().map(|row| row[k].0).collect();
            let edge_minimum = per_rep.iter().map(|row| row[k].1).collect();
            let finite: Vec<f64> = draws.iter().flatten().copied().collect();
            let summary = summarize(&finite);
            let pit_histogram = match &summary {
                Some(s) => Some(pool.install(|| histogram_at(&model, config, reference, s.quantiles[3], hist_reps))?),
                None => None,
            };
            Ok(MethodResult {
                method: m.to_string(),
                draws,
                edge_minimum,
                summary,
                pit_histogram,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SimResult {
        density_id: config.density_id,
        n: config.n,
        replications: config.replications,
        master_seed: config.master_seed,
        methods,
    })
}

fn histogram_at(
    model: &MixtureModel,
    config: &SimConfig,
    reference: Option<&MarginalReference>,
    b: f64,
    reps: usize,
) -> Result<PitHistogram> {
    let pits: Vec<PitVector> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(config.master_seed, r);
            let sample = mixture_sample(model, config.n, &mut rng)?;
            loo_pits_fast(&sample, b, config.kernel)
        })
        .collect::<Result<_>>()?;
    Ok(pit_marginal_histogram(&pits, reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn summary_csv(result: &SimResult) -> String {
    let mut out = String::from("method,min,p2.5,q1,median,q3,p97.5,max,mean,sd,failures,edge_minima\n");
    for m in &result.methods {
        let mut row = vec![m.method.clone()];
        match &m.summary {
            Some(s) => {
                row.extend(s.quantiles.iter().map(|q| q.to_string()));
                row.push(s.mean.to_string());
                row.push(s.sd.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 9)),
        }
        row.push(m.failures().to_string());
        row.push(m.edge_count().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn draws_csv(result: &SimResult) -> String {
    let mut out = String::from("replication,method,b,edge_minimum\n");
    for r in 0..result.replications {
        for m in &result.methods {
            out.push_str(&format!(
                "{r},{},{},{}\n",
                m.method,
                fmt_opt(m.draws[r]),
                m.edge_minimum[r]
            ));
        }
    }
    out
}

pub fn pit_hist_csv(result: &SimResult) -> String {
    let mut out = String::from("method,b,bin_lo,bin_hi,density,reference_density\n");
    let w = 1.0 / HIST_BINS as f64;
    for m in &result.methods {
        if let Some(h) = &m.pit_histogram {
            for i in 0..HIST_BINS {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    m.method,
                    h.b,
                    i as f64 * w,
                    (i + 1) as f64 * w,
                    h.density[i],
                    h.reference_density.as_ref().map_or(String::new(), |d| d[i].to_string())
                ));
            }
        }
    }
    out
}

pub fn to_json(result: &SimResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

pub fn from_json(text: &str) -> Result<SimResult> {
    Ok(serde_json::from_str(text)?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Writes `summary.csv`, `draws.csv` and `pit_hist.csv` into the directory
/// `path` (CSV), or the whole result to the file `path` (JSON).
pub fn emit(result: &SimResult, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => {
            fs::create_dir_all(path)?;
            write_file(&path.join("summary.csv"), &summary_csv(result))?;
            write_file(&path.join("draws.csv"), &draws_csv(result))?;
            write_file(&path.join("pit_hist.csv"), &pit_hist_csv(result))
        }
        Format::Json => write_file(path, &to_json(result)?),
    }
}
