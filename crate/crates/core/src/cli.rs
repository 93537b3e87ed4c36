//! Command-line interface: `simulate`, `fit`, `summarize`, `diagnose` and `lba`.
//!
//! Every command writes into one output directory. When no directory is
//! given, a name is derived under the output root, which defaults to `runs`
//! and can be overridden with the `LDDMM_OUTPUT_ROOT` environment variable.
//!
//! Exit codes are 0 on success, 1 for usage errors, 2 for data, configuration
//! and I/O errors and 3 when the sampler aborts on a numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{Balancing, ModelConfig};
use crate::data::{load_dataset, ColumnSchema};
use crate::diagnostics::diagnostics_report;
use crate::error::{Error, Result};
use crate::lba::{fit_all_blocks, write_lba_csv, LbaOptions, VarianceMode};
use crate::mcmc::store::{read_draws, read_meta, write_atomic, META_FILE};
use crate::mcmc::{run_chain_with, RunOptions};
use crate::posterior::{export_summaries, SummaryRequest};
use crate::simulator::{generate_dataset, ScenarioSpec};

pub const OUTPUT_ROOT_ENV: &str = "LDDMM_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lddmm", version, about = "Longitudinal drift-diffusion mixed models for choice and response-time data")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Default parent directory for outputs.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV, default_value = "runs")]
    pub output_root: PathBuf,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic dataset from a scenario.
    Simulate(SimulateArgs),
    /// Run the MCMC sampler on a dataset.
    Fit(FitArgs),
    /// Posterior trajectories and co-clustering from a finished run.
    Summarize(SummarizeArgs),
    /// Geweke statistics and acceptance rates of a finished run.
    Diagnose(DiagnoseArgs),
    /// Per-block maximum-likelihood fits of the linear ballistic accumulator.
    Lba(LbaArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario name (s7-default, s7-small) or path to a TOML scenario file.
    #[arg(long, default_value = "s7-default")]
    pub scenario: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trial-level CSV with columns subject, block, trial, stimulus, response, rt.
    pub data: PathBuf,
    /// Run directory (default: <output root>/fit-<data stem>-seed<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML configuration; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub z_max: Option<usize>,
    #[arg(long)]
    pub hamming_radius: Option<usize>,
    #[arg(long, value_enum)]
    pub balancing: Option<BalancingArg>,
    /// Temper core-coefficient proposals during burn-in.
    #[arg(long)]
    pub tempering: bool,
    /// Ignore the likelihood.
    #[arg(long)]
    pub prior_only: bool,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue an interrupted run from its checkpoint.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many total iterations, leaving a resumable run.
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BalancingArg {
    Sqrt,
    Identity,
    Uniform,
}

impl From<BalancingArg> for Balancing {
    fn from(b: BalancingArg) -> Self {
        match b {
            BalancingArg::Sqrt => Balancing::Sqrt,
            BalancingArg::Identity => Balancing::Identity,
            BalancingArg::Uniform => Balancing::Uniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Run directory written by `fit`.
    pub run: PathBuf,
    /// Output directory (default: <run>/summary).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Subjects (1-based) for individual trajectories.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<usize>,
    /// Grid points per block interval.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    /// Credible level of the pointwise bands.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Run directory written by `fit`.
    pub run: PathBuf,
    /// Output directory (default: <run>/diagnostics).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Subject (1-based) whose offsets are tracked.
    #[arg(long, default_value_t = 1)]
    pub subject: usize,
    #[arg(long, default_value_t = 0.1)]
    pub frac_a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub frac_b: f64,
}

#[derive(Debug, Args)]
pub struct LbaArgs {
    /// Trial-level CSV.
    pub data: PathBuf,
    /// Output directory (default: <output root>/lba-<data stem>-seed<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Slope variances: `free`, `shared` or `fixed=<value>`.
    #[arg(long, default_value = "free", value_parser = parse_variance)]
    pub variance: VarianceMode,
    /// Per-stimulus constants subtracted from response times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lba_offset: Vec<f64>,
    #[arg(long, default_value_t = 4000)]
    pub max_iters: u64,
}

fn parse_variance(s: &str) -> std::result::Result<VarianceMode, String> {
    match s {
        "free" => Ok(VarianceMode::Free),
        "shared" => Ok(VarianceMode::Shared),
        _ => match s.strip_prefix("fixed=").map(str::parse::<f64>) {
            Some(Ok(v)) if v > 0.0 && v.is_finite() => Ok(VarianceMode::Fixed(v)),
            _ => Err(format!("expected free, shared or fixed=<positive number>, got '{s}'")),
        },
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command inside a thread pool of the requested size.
pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a, &cli.output_root),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Lba(a) => cmd_lba(a, &cli.output_root),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(path, &body)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

/// Refuses to write into a directory that already holds a run.
fn fresh_dir(dir: &Path, marker: &str) -> Result<()> {
    if dir.join(marker).exists() {
        return Err(Error::InvalidArgument(format!(
            "{} already contains a run; choose a new directory",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    version: &'a str,
    command: &'a str,
    scenario: &'a str,
    seed: u64,
    trials: usize,
    /// Built-in scenario values are hand-chosen, not estimates from real data.
    values: &'a str,
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let path = Path::new(&a.scenario);
    let (spec, values) = if path.extension().is_some_and(|e| e == "toml") || path.exists() {
        (ScenarioSpec::load(path)?, "user-supplied")
    } else {
        (ScenarioSpec::builtin(&a.scenario)?, "artifact-defined")
    };
    fresh_dir(&a.out, "simulate_meta.json")?;
    let (ds, truth) = generate_dataset(&spec, a.seed)?;
    ds.write_csv(&a.out.join("data.csv"))?;
    write_json(&a.out.join("truth.json"), &truth)?;
    write_json(
        &a.out.join("simulate_meta.json"),
        &SimulateMeta {
            version: env!("CARGO_PKG_VERSION"),
            command: "simulate",
            scenario: &spec.name,
            seed: a.seed,
            trials: ds.len(),
            values,
        },
    )?;
    log::info!("wrote {} trials to {}", ds.len(), a.out.display());
    Ok(())
}

/// Effective configuration: defaults, then the config file, then flags.
pub fn fit_config(a: &FitArgs) -> Result<ModelConfig> {
    let mut cfg = match &a.config {
        Some(p) => ModelConfig::load(p)?,
        None => ModelConfig::default(),
    };
    if let Some(v) = a.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = a.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = a.thin {
        cfg.thin = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.z_max {
        cfg.z_max = v;
    }
    if let Some(v) = a.hamming_radius {
        cfg.hamming_radius = v;
    }
    if let Some(v) = a.balancing {
        cfg.balancing = v.into();
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    cfg.tempering |= a.tempering;
    cfg.prior_only |= a.prior_only;
    Ok(cfg)
}

pub fn cmd_fit(a: &FitArgs, root: &Path) -> Result<()> {
    let ds = load_dataset(&a.data, &ColumnSchema::default())?;
    let cfg = fit_config(a)?;
    cfg.validate(&ds)?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("fit-{}-seed{}", stem(&a.data), cfg.seed)));
    if !a.resume {
        fresh_dir(&dir, META_FILE)?;
    }
    let opts = RunOptions {
        run_dir: Some(dir.clone()),
        resume: a.resume,
        stop_after: a.stop_after,
    };
    let out = run_chain_with(&ds, &cfg, &opts)?;
    log::info!(
        "{} iterations, {} stored draws in {}",
        out.meta.iterations_completed,
        out.meta.stored_draws,
        dir.display()
    );
    Ok(())
}

pub fn cmd_summarize(a: &SummarizeArgs) -> Result<()> {
    let draws = read_draws(&a.run)?;
    let subjects = a
        .subjects
        .iter()
        .map(|&s| {
            if s == 0 || s > draws.dims.n_subjects {
                Err(Error::InvalidArgument(format!("subject {s} out of range 1..={}", draws.dims.n_subjects)))
            } else {
                Ok(s - 1)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if !(a.level > 0.0 && a.level < 1.0) || a.grid == 0 {
        return Err(Error::InvalidArgument("level must lie in (0, 1) and grid must be positive".into()));
    }
    let req = SummaryRequest {
        subjects,
        grid_per_interval: a.grid,
        level: a.level,
        ..Default::default()
    };
    let out = a.out.clone().unwrap_or_else(|| a.run.join("summary"));
    let written = export_summaries(&draws, &out, &req)?;
    log::info!("wrote {} summary files to {}", written.len(), out.display());
    Ok(())
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    let draws = read_draws(&a.run)?;
    let acceptance = read_meta(&a.run).map(|m| m.acceptance).unwrap_or_default();
    if a.subject == 0 || a.subject > draws.dims.n_subjects {
        return Err(Error::InvalidArgument(format!(
            "subject {} out of range 1..={}",
            a.subject, draws.dims.n_subjects
        )));
    }
    let report = diagnostics_report(&draws, a.subject - 1, a.frac_a, a.frac_b, acceptance)?;
    let out = a.out.clone().unwrap_or_else(|| a.run.join("diagnostics"));
    report.write(&out)?;
    log::info!(
        "{} traces, rejection rate at 5%: {:.3}",
        report.entries.len(),
        report.rejection_rate(0.05)
    );
    Ok(())
}

#[derive(Serialize)]
struct LbaMeta<'a> {
    version: &'a str,
    command: &'a str,
    data: String,
    options: &'a LbaOptions,
}

pub fn cmd_lba(a: &LbaArgs, root: &Path) -> Result<()> {
    let ds = load_dataset(&a.data, &ColumnSchema::default())?;
    if !a.lba_offset.is_empty() && a.lba_offset.len() != ds.n_categories() {
        return Err(Error::InvalidArgument(format!(
            "--lba-offset needs {} values, got {}",
            ds.n_categories(),
            a.lba_offset.len()
        )));
    }
    let opts = LbaOptions {
        restarts: a.restarts,
        seed: a.seed,
        variance: a.variance,
        offsets: (!a.lba_offset.is_empty()).then(|| a.lba_offset.clone()),
        max_iters: a.max_iters,
    };
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| root.join(format!("lba-{}-seed{}", stem(&a.data), a.seed)));
    fresh_dir(&dir, "lba_meta.json")?;
    let fits = fit_all_blocks(&ds, &opts)?;
    write_lba_csv(&fits, &dir)?;
    write_json(
        &dir.join("lba_meta.json"),
        &LbaMeta {
            version: env!("CARGO_PKG_VERSION"),
            command: "lba",
            data: a.data.display().to_string(),
            options: &opts,
        },
    )?;
    Ok(())
}
