//! Command-line front end for iMaxEnt bandwidth selection.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use imaxent::geometry::{marginal_density_exact_rational, EXACT_HARD_LIMIT};
use imaxent::mixtures::{min_mise_bandwidths, mixture};
use imaxent::reference::{self, default_draws, DEFAULT_GRID};
use imaxent::select::{select, Method, SelectOptions};
use imaxent::sim::{self, Format};
use imaxent::{Error, Kernel, MarginalReference, Sample, SimConfig};

#[derive(Parser)]
#[command(name = "imaxent", version, about = "iMaxEnt bandwidth selection for kernel estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reference distribution tables.
    #[command(subcommand)]
    Reference(ReferenceCommand),
    /// Marginal density of the uniform law on the permutohedron.
    Marginal(MarginalArgs),
    /// Select a bandwidth for a sample.
    Bandwidth(BandwidthArgs),
    /// Exact MISE-optimal bandwidths for a normal mixture.
    Mise(MiseArgs),
    /// Monte Carlo study over a normal mixture.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum ReferenceCommand {
    /// Build and save the marginal reference for sample size n.
    Build(BuildArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    n: usize,
    /// Monte Carlo draws; defaults to max(10 grid, 2e6 / n).
    #[arg(long)]
    draws: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MarginalArgs {
    #[arg(long)]
    n: usize,
    /// Emit the exact piecewise polynomial as JSON.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Seed for the simulated reference used when n is too large for the exact path.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BandwidthArgs {
    #[arg(long)]
    input: PathBuf,
    /// CSV column name or 0-based index; without it the input is one value per line.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value = "gaussian")]
    kernel: Kernel,
    /// Reference cache file, or `auto` to build one.
    #[arg(long = "ref", default_value = "auto")]
    reference: String,
    /// Directory for cached references when `--ref auto`.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Lower and upper edge of the search bracket.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    bracket: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MiseArgs {
    #[arg(long)]
    density: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "gaussian")]
    kernel: Kernel,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    density: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    reps: usize,
    /// Comma-separated methods, e.g. `ad,cvm:1:0.001,ns:4,cue:2,m2,cv`.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long, default_value = "gaussian")]
    kernel: Kernel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Reference cache file, or `auto`.
    #[arg(long = "ref", default_value = "auto")]
    reference: String,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Write one JSON file instead of a CSV directory.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(command: Command) -> imaxent::Result<()> {
    match command {
        Command::Reference(ReferenceCommand::Build(a)) => {
            let draws = a.draws.unwrap_or_else(|| default_draws(a.n, a.grid));
            let r = reference::build_reference(a.n, draws, a.grid, a.seed)?;
            reference::save_reference(&r, &a.out)
        }
        Command::Marginal(a) => marginal(a),
        Command::Bandwidth(a) => bandwidth(a),
        Command::Mise(a) => {
            let model = mixture(a.density)?;
            let m = min_mise_bandwidths(&model, a.n, a.kernel)?;
            write_json(&m, a.out.as_deref())
        }
        Command::Simulate(a) => simulate(a),
    }
}

#[derive(Serialize)]
struct ExactPiece {
    lo: f64,
    hi: f64,
    coefficients: Vec<f64>,
    coefficients_exact: Vec<String>,
}

#[derive(Serialize)]
struct ExactOutput {
    n: usize,
    knots: Vec<f64>,
    pieces: Vec<ExactPiece>,
}

fn marginal(a: MarginalArgs) -> imaxent::Result<()> {
    if a.grid < 2 {
        return Err(Error::Unsupported(format!("grid must be >= 2, got {}", a.grid)));
    }
    if a.exact {
        let exact = marginal_density_exact_rational(a.n, EXACT_HARD_LIMIT)?;
        let density = exact.to_density();
        let pieces = density
            .pieces
            .iter()
            .zip(&exact.pieces)
            .map(|(p, q)| ExactPiece {
                lo: p.lo,
                hi: p.hi,
                coefficients: p.coefficients.clone(),
                coefficients_exact: q.iter().map(|c| c.to_string()).collect(),
            })
            .collect();
        let out = ExactOutput {
            n: a.n,
            knots: density.knots(),
            pieces,
        };
        return write_json(&out, Some(&a.out));
    }
    let rows: Vec<(f64, f64)> = if a.n <= EXACT_HARD_LIMIT {
        let density = marginal_density_exact_rational(a.n, EXACT_HARD_LIMIT)?.to_density();
        (0..=a.grid)
            .map(|k| {
                let u = k as f64 / a.grid as f64;
                (u, density.eval(u))
            })
            .collect()
    } else {
        let r = reference::build_reference(a.n, default_draws(a.n, a.grid), a.grid, a.seed)?;
        r.grid.iter().copied().zip(r.density_values.iter().copied()).collect()
    };
    let mut text = String::from("u,l_n_u\n");
    for (u, l) in rows {
        text.push_str(&format!("{u},{l}\n"));
    }
    write_text(&text, Some(&a.out))
}

fn resolve_reference(spec: &str, cache: Option<&Path>, n: usize, seed: u64) -> imaxent::Result<MarginalReference> {
    if spec == "auto" {
        let draws = default_draws(n, DEFAULT_GRID);
        match cache {
            Some(dir) => reference::load_or_build(dir, n, draws, DEFAULT_GRID, seed),
            None => reference::build_reference(n, draws, DEFAULT_GRID, seed),
        }
    } else {
        reference::load_reference(Path::new(spec))
    }
}

#[derive(Serialize)]
struct BandwidthOutput {
    b: f64,
    method: String,
    objective: f64,
    local_minima: Vec<(f64, f64)>,
    flags: Vec<String>,
    bracket: (f64, f64),
    evaluations: usize,
    interior_alternative: Option<(f64, f64)>,
}

fn bandwidth(a: BandwidthArgs) -> imaxent::Result<()> {
    let values = imaxent::data::read_sample(&a.input, a.column.as_deref())?;
    let sample = Sample::new(values)?;
    let reference = if a.method.needs_reference() {
        Some(resolve_reference(&a.reference, a.cache.as_deref(), sample.len(), a.seed)?)
    } else {
        None
    };
    let options = SelectOptions {
        bracket: a.bracket.map(|v| (v[0], v[1])),
        ..SelectOptions::default()
    };
    let est = select(&a.method, &sample, reference.as_ref(), a.kernel, &options)?;
    let out = BandwidthOutput {
        b: est.b,
        method: est.method,
        objective: est.objective_value,
        local_minima: est.all_local_minima,
        flags: est.flags,
        bracket: est.bracket,
        evaluations: est.evaluations,
        interior_alternative: est.interior_alternative,
    };
    write_json(&out, a.out.as_deref())
}

fn simulate(a: SimulateArgs) -> imaxent::Result<()> {
    if a.methods.is_empty() {
        return Err(Error::Unsupported("at least one method is required".into()));
    }
    let reference = if a.reference == "auto" {
        sim::ReferenceSource::Auto { cache_dir: a.cache }
    } else {
        sim::ReferenceSource::Path(PathBuf::from(&a.reference))
    };
    let config = SimConfig {
        density_id: a.density,
        n: a.n,
        replications: a.reps,
        methods: a.methods,
        kernel: a.kernel,
        master_seed: a.seed,
        reference,
        workers: a.workers,
    };
    let result = sim::run_simulation(&config)?;
    let format = if a.json { Format::Json } else { Format::Csv };
    sim::emit(&result, format, &a.out)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> imaxent::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> imaxent::Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
