//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::distributions::fdd_cdf_oracle;
use crate::error::{Error, Result};
use crate::pointprocess::SamplingMeasure;
use crate::simulator::{transform_marginals, Marginal, SimConfig, Simulator, DEFAULT_CLUSTER_CAP};
use crate::sites::SiteSet;
use crate::stats::{cluster_count_stats, extremal_index_estimate, pickands_estimate};
use crate::svg::emit_svg_qq;
use crate::validation::{run_validation, ValidationConfig};
use crate::variogram::VariogramModel;
use crate::VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "brsim",
    version,
    about = "Exact simulation of Brown-Resnick random fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw independent replications of the field at the given sites.
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of P(eta(t_j) <= y_j for all j).
    Oracle(OracleArgs),
    /// Run the statistical validation suite.
    Validate(ValidateArgs),
    /// Estimate N^{-d} E exp(max Z) over [0, N]^d.
    Pickands(PickandsArgs),
    /// Estimate the discrete extremal index n^{-1} E max_{i<=n} e^{Z(i)}.
    Theta(ThetaArgs),
    /// Record cluster counts for a list of alpha values.
    Clusters(ClustersArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SiteArgs {
    /// CSV file with one site per row.
    #[arg(long, conflicts_with = "grid")]
    pub sites: Option<PathBuf>,
    /// The sites CSV has a header row.
    #[arg(long, requires = "sites")]
    pub header: bool,
    /// Grid expression a:b:mesh[,a:b:mesh...], inclusive endpoints.
    #[arg(long)]
    pub grid: Option<String>,
}

impl SiteArgs {
    pub fn load(&self) -> Result<SiteSet> {
        match (&self.sites, &self.grid) {
            (Some(p), None) => SiteSet::from_csv(p, self.header),
            (None, Some(g)) => SiteSet::grid(g),
            _ => Err(Error::usage("exactly one of --sites or --grid is required")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Dimension; defaults to that of the sites.
    #[arg(long)]
    pub dim: Option<usize>,
}

impl ModelArgs {
    fn model(&self, site_dim: usize) -> Result<VariogramModel> {
        let dim = self.dim.unwrap_or(site_dim);
        VariogramModel::fractional(self.alpha, self.scale, dim)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sites: SiteArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, env = "BRSIM_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "BRSIM_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t = Marginal::Gumbel)]
    pub marginals: Marginal,
    /// `uniform` is the only named measure; use --measure-weights otherwise.
    #[arg(long, default_value = "uniform", conflicts_with = "measure_weights")]
    pub measure: String,
    /// CSV with one positive weight per site.
    #[arg(long)]
    pub measure_weights: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_CAP)]
    pub cluster_cap: u64,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Diagnostics JSON.
    #[arg(long)]
    pub diag: Option<PathBuf>,
    /// Write `wall_time_s` as null so the diagnostics replay byte for byte.
    #[arg(long)]
    pub no_wall_time: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub sites: SiteArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Thresholds, comma separated, one per site.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub y: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: usize,
    #[arg(long, env = "BRSIM_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Lag of the bivariate dependence check.
    #[arg(long, default_value_t = 1.0 - 1.0 / 1024.0)]
    pub s: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, env = "BRSIM_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Workers for the determinism check.
    #[arg(long, env = "BRSIM_WORKERS", default_value_t = 8)]
    pub workers: usize,
    /// Checks to skip (marginal, bivariate, mu_invariance, stationarity, determinism).
    #[arg(long, value_delimiter = ',')]
    pub skip: Vec<String>,
    #[arg(long, default_value = "validate.json")]
    pub report: PathBuf,
    #[arg(long, default_value = "qq.svg")]
    pub qq: PathBuf,
}

#[derive(Debug, Args)]
pub struct PickandsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Side length N of the box [0, N]^d.
    #[arg(long = "N")]
    pub side: String,
    /// Grid mesh; fractions such as 1/32 are accepted.
    #[arg(long)]
    pub mesh: String,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, env = "BRSIM_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, env = "BRSIM_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClustersArgs {
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub sites: SiteArgs,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, env = "BRSIM_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// CSV of counts (alpha,rep,num_clusters); stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON; printed to stdout if omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Parses a decimal or a fraction `a/b`.
pub fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::usage(format!("`{s}` is not a number"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn require_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::usage("--reps must be at least 1"));
    }
    Ok(())
}

/// Runs a parsed command, writing human-facing output to `stdout`.
/// Returns the process exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Oracle(a) => cmd_oracle(a, stdout),
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::Pickands(a) => cmd_pickands(a, stdout),
        Command::Theta(a) => cmd_theta(a, stdout),
        Command::Clusters(a) => cmd_clusters(a, stdout),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    require_reps(a.reps)?;
    let sites = a.sites.load()?;
    let model = a.model.model(sites.dim())?;
    let measure = match (&a.measure_weights, a.measure.as_str()) {
        (Some(p), _) => Some(SamplingMeasure::from_csv(p)?),
        (None, "uniform") => None,
        (None, other) => return Err(Error::usage(format!("unknown measure `{other}`"))),
    };
    let config = SimConfig {
        workers: a.workers,
        cluster_cap: a.cluster_cap,
        ..SimConfig::default()
    };
    let start = Instant::now();
    let sim = Simulator::new(&sites, &model, measure, config)?;
    let samples = sim.simulate_reps(a.seed, a.reps)?;
    let wall = start.elapsed().as_secs_f64();

    let mut csv = String::new();
    let header: Vec<String> = (0..sites.len()).map(|j| format!("site_{j}")).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for s in &samples {
        let row: Vec<String> = transform_marginals(s, a.marginals)
            .values
            .iter()
            .map(|x| x.to_string())
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    match &a.out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => stdout.write_all(csv.as_bytes()).map_err(io_err)?,
    }

    if let Some(p) = &a.diag {
        let counts: Vec<u64> = samples.iter().map(|s| s.num_clusters).collect();
        let diag = json!({
            "seed": a.seed,
            "alpha": model.alpha(),
            "scale": model.scale(),
            "n": sites.len(),
            "reps": a.reps,
            "workers": a.workers,
            "marginals": a.marginals,
            "version": VERSION,
            "cluster_counts": counts,
            "wall_time_s": if a.no_wall_time { None } else { Some(wall) },
        });
        write_file(p, to_json(&diag)?.as_bytes())?;
    }
    Ok(0)
}

pub fn cmd_oracle(a: OracleArgs, stdout: &mut dyn Write) -> Result<i32> {
    require_reps(a.reps)?;
    let sites = a.sites.load()?;
    let model = a.model.model(sites.dim())?;
    let est = fdd_cdf_oracle(&sites, &model, &a.y, a.reps, a.seed)?;
    let out = json!({
        "value": est.value,
        "std_error": est.std_error,
        "reps": a.reps,
        "seed": a.seed,
        "alpha": model.alpha(),
        "n": sites.len(),
        "version": VERSION,
    });
    stdout
        .write_all(to_json(&out)?.as_bytes())
        .map_err(io_err)?;
    Ok(0)
}

pub fn cmd_validate(a: ValidateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = ValidationConfig {
        alpha: a.alpha,
        scale: a.scale,
        s: a.s,
        reps: a.reps,
        seed: a.seed,
        workers: a.workers,
        skip: a.skip,
    };
    let (report, qq) = run_validation(&cfg)?;
    write_file(&a.report, to_json(&report)?.as_bytes())?;
    if let Some(pairs) = qq {
        emit_svg_qq(&pairs, &a.qq)?;
    }
    for c in &report.checks {
        writeln!(
            stdout,
            "{:<14} {}  statistic={:.6} threshold={:.6}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.statistic,
            c.threshold
        )
        .map_err(io_err)?;
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn estimate_json(value: f64, se: f64, reps: usize, seed: u64, alpha: f64, n: usize) -> Value {
    json!({
        "value": value,
        "std_error": se,
        "reps": reps,
        "seed": seed,
        "alpha": alpha,
        "n": n,
        "version": VERSION,
    })
}

pub fn cmd_pickands(a: PickandsArgs, stdout: &mut dyn Write) -> Result<i32> {
    require_reps(a.reps)?;
    let model = VariogramModel::fractional(a.alpha, a.scale, a.dim)?;
    let side = parse_number(&a.side)?;
    let mesh = parse_number(&a.mesh)?;
    let est = pickands_estimate(&model, side, mesh, a.reps, a.seed)?;
    let n = ((side / mesh).round() as usize + 1).pow(a.dim as u32);
    let out = estimate_json(est.value, est.std_error, a.reps, a.seed, a.alpha, n);
    stdout
        .write_all(to_json(&out)?.as_bytes())
        .map_err(io_err)?;
    Ok(0)
}

pub fn cmd_theta(a: ThetaArgs, stdout: &mut dyn Write) -> Result<i32> {
    require_reps(a.reps)?;
    let model = VariogramModel::fractional(a.alpha, a.scale, 1)?;
    let est = extremal_index_estimate(&model, a.n, a.reps, a.seed)?;
    let out = estimate_json(est.value, est.std_error, a.reps, a.seed, a.alpha, a.n);
    stdout
        .write_all(to_json(&out)?.as_bytes())
        .map_err(io_err)?;
    Ok(0)
}

pub fn cmd_clusters(a: ClustersArgs, stdout: &mut dyn Write) -> Result<i32> {
    require_reps(a.reps)?;
    if a.alphas.is_empty() {
        return Err(Error::usage("--alphas needs at least one value"));
    }
    let sites = a.sites.load()?;
    let mut csv = String::from("alpha,rep,num_clusters\n");
    let mut rows = Vec::new();
    for &alpha in &a.alphas {
        let model = VariogramModel::fractional(alpha, a.scale, sites.dim())?;
        let sim = Simulator::new(&sites, &model, None, SimConfig::default())?;
        let counts: Vec<u64> = sim
            .simulate_reps(a.seed, a.reps)?
            .iter()
            .map(|s| s.num_clusters)
            .collect();
        for (r, c) in counts.iter().enumerate() {
            csv.push_str(&format!("{alpha},{r},{c}\n"));
        }
        rows.push(json!({
            "alpha": alpha,
            "summary": cluster_count_stats(&counts, a.bins)?,
        }));
    }
    let summary = json!({
        "seed": a.seed,
        "alpha": a.alphas,
        "n": sites.len(),
        "reps": a.reps,
        "version": VERSION,
        "rows": rows,
    });
    match &a.out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => stdout.write_all(csv.as_bytes()).map_err(io_err)?,
    }
    let text = to_json(&summary)?;
    match &a.summary {
        Some(p) => write_file(p, text.as_bytes())?,
        None => stdout.write_all(text.as_bytes()).map_err(io_err)?,
    }
    Ok(0)
}
