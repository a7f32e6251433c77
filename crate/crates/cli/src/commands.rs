use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use herding_core::analysis::{
    ccdf, compare_tail_shape, cutoff_scan, log_binned_pdf, write_fits_csv, write_pdf_csv, ScanOptions, ScanRow,
    TailShape,
};
use herding_core::engine::ReturnSeries;
use herding_core::meanfield::{solve_stationary, stationary_oracle, SolverOptions, SolverReport, ORACLE_MAX_AGENTS};
use herding_core::sweep::{derive_seed, run_each};
use herding_core::voting::ConsensusParameter;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{timestamp, write_run, StoredRun, Written};
use crate::validate::{run_checks, ValidateOptions};

pub const WORKERS_ENV: &str = "HERDING_WORKERS";

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML config file; built-in defaults when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set x=0.41`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory receiving the run directory.
    #[arg(short, long, default_value = "runs")]
    pub out: PathBuf,
}

pub fn cmd_run(args: &RunArgs) -> Result<PathBuf, CliError> {
    let cfg = RunConfig::load(args.config.config.as_deref(), &args.config.overrides)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let model = cfg.to_model()?;
    let started = timestamp();
    let (series, summary) = model.run()?;
    let written = write_run(&args.out, &cfg, &series, &summary, started)?;
    match &written {
        Written::Created(p) => eprintln!("wrote {} in {:.2}s", p.display(), summary.wall_time_secs),
        Written::Existing(p) => eprintln!("{} already exists, kept", p.display()),
    }
    Ok(written.path().to_path_buf())
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Consensus parameters; defaults to the config value.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub x: Option<Vec<f64>>,
    /// Population sizes; defaults to the config value.
    #[arg(long = "n-agents", value_delimiter = ',', num_args = 0..)]
    pub n_agents: Option<Vec<usize>>,
    /// Independent runs per grid point.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Seed from which every run seed is derived.
    #[arg(long, default_value_t = 1)]
    pub master_seed: u64,
    /// Parallel runs; defaults to the available cores.
    #[arg(short, long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(short, long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub n_agents: usize,
    pub replica: usize,
    pub seed: u64,
    pub run_dir: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepManifest {
    pub code_version: String,
    pub master_seed: u64,
    pub base_config: RunConfig,
    pub points: Vec<SweepPoint>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Returns the sweep manifest path and the number of failed points.
pub fn cmd_sweep(args: &SweepArgs) -> Result<(PathBuf, usize), CliError> {
    let base = RunConfig::load(args.config.config.as_deref(), &args.config.overrides)?;
    let xs = args.x.clone().unwrap_or_else(|| vec![base.x]);
    let ns = args.n_agents.clone().unwrap_or_else(|| vec![base.n_agents]);
    if xs.is_empty() || ns.is_empty() || args.replicas == 0 {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    let workers = args.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Usage("worker count must be positive".into()));
    }

    let mut configs = Vec::new();
    let mut points = Vec::new();
    for &n in &ns {
        for &x in &xs {
            for replica in 0..args.replicas {
                let mut c = base.clone();
                c.n_agents = n;
                c.x = x;
                c.seed = derive_seed(args.master_seed, configs.len() as u64);
                points.push(SweepPoint { x, n_agents: n, replica, seed: c.seed, run_dir: None, error: None });
                configs.push(c);
            }
        }
    }
    // invalid points fail alone; the rest still run
    let mut jobs = Vec::new();
    let mut job_of_point = Vec::new();
    for (c, p) in configs.iter().zip(points.iter_mut()) {
        match c.to_model() {
            Ok(m) => {
                job_of_point.push(Some(jobs.len()));
                jobs.push(m);
            }
            Err(e) => {
                p.error = Some(e.to_string());
                job_of_point.push(None);
            }
        }
    }
    let started = timestamp();
    let mut results: Vec<_> = run_each(&jobs, workers)?.into_iter().map(Some).collect();
    for (i, p) in points.iter_mut().enumerate() {
        let Some(j) = job_of_point[i] else { continue };
        match results[j].take().expect("each job used once") {
            Ok((series, summary)) => match write_run(&args.out, &configs[i], &series, &summary, started.clone()) {
                Ok(w) => p.run_dir = Some(w.path().file_name().unwrap().to_string_lossy().into_owned()),
                Err(e) => p.error = Some(e.to_string()),
            },
            Err(e) => p.error = Some(e.to_string()),
        }
    }

    let failed = points.iter().filter(|p| p.error.is_some()).count();
    let manifest = SweepManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: args.master_seed,
        base_config: base,
        points,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let digest = hex::encode(Sha256::digest(body.as_bytes()));
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let path = args.out.join(format!("sweep-{}.json", &digest[..16]));
    fs::write(&path, body).map_err(CliError::io(&path))?;
    eprintln!("{} of {} grid points written, manifest {}", manifest.points.len() - failed, manifest.points.len(), path.display());
    Ok((path, failed))
}

#[derive(Debug, Clone, Args)]
pub struct MeanfieldArgs {
    #[arg(long = "n-agents")]
    pub n_agents: usize,
    #[arg(long)]
    pub x: f64,
    #[arg(long, default_value_t = SolverOptions::default().tolerance)]
    pub tolerance: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iterations)]
    pub max_iterations: usize,
    /// Distribution file (`size<TAB>n_s`); stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also solve the exact chain over partitions (small populations only)
    /// and report the largest per-size difference.
    #[arg(long)]
    pub compare_oracle: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanfieldReport {
    pub n_agents: usize,
    pub x: f64,
    #[serde(flatten)]
    pub solver: SolverReport,
    pub mass: f64,
    pub total_groups: f64,
    pub oracle_max_abs_diff: Option<f64>,
}

pub fn cmd_meanfield(args: &MeanfieldArgs) -> Result<MeanfieldReport, CliError> {
    let x = ConsensusParameter::new(args.x).map_err(|e| CliError::Config { field: "x".into(), message: e.to_string() })?;
    let opts = SolverOptions { tolerance: args.tolerance, max_iterations: args.max_iterations, ..SolverOptions::default() };
    let (dist, solver) = solve_stationary(args.n_agents, x, opts)?;
    let oracle_max_abs_diff = if args.compare_oracle {
        if args.n_agents > ORACLE_MAX_AGENTS {
            return Err(CliError::Usage(format!("--compare-oracle needs n-agents <= {ORACLE_MAX_AGENTS}")));
        }
        let exact = stationary_oracle(args.n_agents, x)?;
        Some((1..=args.n_agents).map(|s| (dist.get(s) - exact.get(s)).abs()).fold(0.0, f64::max))
    } else {
        None
    };

    let mut text = Vec::new();
    dist.write_text(&mut text)?;
    match &args.out {
        Some(p) => fs::write(p, &text).map_err(CliError::io(p))?,
        None => std::io::stdout().write_all(&text).map_err(CliError::io("<stdout>"))?,
    }
    let report = MeanfieldReport {
        n_agents: args.n_agents,
        x: args.x,
        solver,
        mass: dist.mass(),
        total_groups: dist.total_groups(),
        oracle_max_abs_diff,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if args.out.is_some() {
        println!("{json}");
    } else {
        eprintln!("{json}");
    }
    if !solver.converged {
        return Err(CliError::NotConverged { iterations: solver.iterations, residual: solver.residual });
    }
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Run directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(short, long, default_value = "analysis")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins_per_decade: usize,
    /// Common lower cutoff for the tail fits; chosen by KS distance on the
    /// first run when omitted.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Threshold for tail masses and the tail-shape comparison.
    #[arg(long, default_value_t = 50)]
    pub tail_threshold: u64,
    /// Analyze single-step returns instead of the rescaled series.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzedRun {
    pub run: String,
    pub x: f64,
    pub n_trades: usize,
    pub tail_shape: Option<TailShape>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub rescaled: bool,
    pub r_min: f64,
    pub tail_threshold: u64,
    pub runs: Vec<AnalyzedRun>,
    pub fits: Vec<ScanRow>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport, CliError> {
    let mut loaded: Vec<(StoredRun, ReturnSeries)> = Vec::new();
    for dir in &args.runs {
        let run = StoredRun::open(dir)?;
        let series = run.returns(!args.raw)?;
        if series.values().iter().all(|r| *r == 0) {
            return Err(CliError::Input { path: dir.clone(), message: "no trades in this run".into() });
        }
        loaded.push((run, series));
    }
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    let mut runs = Vec::new();
    for (run, series) in &loaded {
        let dir = args.out.join(run.name());
        fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        let curve = ccdf(series)?;
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        write_file(&dir.join("ccdf.csv"), &buf)?;
        let sizes: Vec<f64> = series.trade_sizes().into_iter().filter(|v| *v > 0).map(|v| v as f64).collect();
        let mut buf = Vec::new();
        write_pdf_csv(&log_binned_pdf(&sizes, args.bins_per_decade)?, &mut buf)?;
        write_file(&dir.join("pdf.csv"), &buf)?;
        runs.push(AnalyzedRun {
            run: run.name(),
            x: run.config.x,
            n_trades: curve.sample_size,
            tail_shape: compare_tail_shape(&curve, args.tail_threshold).ok(),
        });
    }

    let samples: Vec<(f64, ReturnSeries)> = loaded.iter().map(|(r, s)| (r.config.x, s.clone())).collect();
    let (r_min, fits) = cutoff_scan(&samples, ScanOptions { r_min: args.r_min, tail_threshold: args.tail_threshold })?;
    let mut buf = Vec::new();
    write_fits_csv(&fits, &mut buf)?;
    write_file(&args.out.join("fits.csv"), &buf)?;
    let report = AnalysisReport { rescaled: !args.raw, r_min, tail_threshold: args.tail_threshold, runs, fits };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&args.out.join("report.json"), json.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Add this offset to every computed fragmentation probability before
    /// checking it. Negative control for the checker itself.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub perturb_p_frg: f64,
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let checks = run_checks(&ValidateOptions { perturb_p_frg: args.perturb_p_frg });
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut by_status: BTreeMap<bool, usize> = BTreeMap::new();
    for c in &checks {
        *by_status.entry(c.passed).or_default() += 1;
        println!(
            "{:<width$}  {:>10.3e}  {:>3} {:<9.1e}  {}",
            c.name,
            c.value,
            if c.upper_bound { "<=" } else { ">=" },
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    let failed = by_status.get(&false).copied().unwrap_or(0);
    println!("{} passed, {failed} failed", by_status.get(&true).copied().unwrap_or(0));
    if failed > 0 {
        return Err(CliError::Validation { failed });
    }
    Ok(())
}
