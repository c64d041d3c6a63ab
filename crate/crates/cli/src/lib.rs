//! Batch experiment runner for PSRO meta-strategy solvers.
//!
//! [`run`] is the whole command line; the binary only forwards its
//! arguments, `EGTA_SEED` and the standard streams.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
mod solve;

use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egta_core::bps::BpsConfig;
use egta_core::meta::{MssParams, MssSpec};
use egta_core::psro::PsroConfig;
use egta_core::solvers::{QreConfig, RdConfig};

use crate::config::{ExperimentConfig, MssEntry};
use crate::error::{CliError, Result};
use crate::experiment::{build_games, plan_cells, run_cells, CellOutcome, NamedGame};
use crate::output::{write_all, ManifestInfo};

pub use crate::error::CliError as Error;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status when at least one cell failed.
pub const EXIT_CELL_FAILED: i32 = 2;

/// λ grid used by `sweep` when the config gives none.
pub const DEFAULT_SWEEP: [f64; 6] = [0.0, 0.05, 0.1, 0.2, 0.35, 0.6];

#[derive(Debug, Parser)]
#[command(name = "egta", version, about = "Run PSRO experiments over normal-form games")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Maximum number of cells run concurrently.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory, overriding `experiment.output_dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (MSS, seed, λ) cell of a config.
    Run(ConfigArg),
    /// Compare meta-strategy solvers; uses a preset list when the config has none.
    Compare(ConfigArg),
    /// Sweep the RRD threshold over `lambda_sweep` or a default grid.
    Sweep(ConfigArg),
    /// Run with backward profile search and print per-iteration savings.
    BpsDemo(ConfigArg),
    /// Solve a game file once and print the profile and its regret.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    config: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverName {
    Nash,
    Rrd,
    Prd,
    Qre,
    Mrcp,
}

#[derive(Debug, Args)]
struct SolveArgs {
    game: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverName,
    /// RRD regret threshold.
    #[arg(long)]
    lambda: Option<f64>,
    /// QRE rationality.
    #[arg(long)]
    tau: Option<f64>,
    /// MRCP restriction, e.g. "0,1;0,1"; defaults to every strategy.
    #[arg(long)]
    sets: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, env_seed, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: Cli, env_seed: Option<&str>, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> Result<i32> {
    let opts = RunOptions { jobs: cli.jobs, output: cli.output, quiet: cli.quiet };
    let load = |path: &PathBuf| -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(path)?;
        apply_env_seed(&mut cfg, env_seed)?;
        Ok(cfg)
    };
    let seed_source = if env_seed.is_some() { "EGTA_SEED" } else { "config" };
    match cli.command {
        Command::Run(a) => {
            let cfg = load(&a.config)?;
            let report = execute(&cfg, &opts, "run", seed_source, err)?;
            if !opts.quiet {
                print_summary(out, &report)?;
            }
            Ok(report.exit_code())
        }
        Command::Compare(a) => {
            let mut cfg = load(&a.config)?;
            if cfg.mss.is_empty() {
                cfg.mss = compare_preset();
            }
            let report = execute(&cfg, &opts, "compare", seed_source, err)?;
            if !opts.quiet {
                print_comparison(out, &cfg, &report.outcomes)?;
            }
            Ok(report.exit_code())
        }
        Command::Sweep(a) => {
            let mut cfg = load(&a.config)?;
            prepare_sweep(&mut cfg, err, opts.quiet)?;
            let report = execute(&cfg, &opts, "sweep", seed_source, err)?;
            if !opts.quiet {
                print_sweep(out, &cfg, &report.outcomes)?;
            }
            Ok(report.exit_code())
        }
        Command::BpsDemo(a) => {
            let mut cfg = load(&a.config)?;
            if cfg.mss.is_empty() {
                cfg.mss = vec![MssEntry { label: "DO_NASH".into(), spec: MssSpec::do_nash() }];
            }
            if cfg.psro.bps.is_none() {
                cfg.psro.bps = Some(BpsConfig::default());
            }
            for m in &cfg.mss {
                PsroConfig { bps: cfg.psro.bps, ..PsroConfig::new(m.spec.clone(), 1) }.validate()?;
            }
            let report = execute(&cfg, &opts, "bps-demo", seed_source, err)?;
            if !opts.quiet {
                print_savings(out, &report.outcomes, &report.games)?;
            }
            Ok(report.exit_code())
        }
        Command::Solve(a) => {
            solve::solve(&a.game, a.solver, a.lambda, a.tau, a.sets.as_deref(), a.seed, out)?;
            Ok(EXIT_OK)
        }
    }
}

fn apply_env_seed(cfg: &mut ExperimentConfig, env_seed: Option<&str>) -> Result<()> {
    if let Some(raw) = env_seed {
        cfg.master_seed = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("EGTA_SEED must be an unsigned integer, got {raw:?}")))?;
    }
    Ok(())
}

#[derive(Debug, Default)]
struct RunOptions {
    jobs: Option<usize>,
    output: Option<PathBuf>,
    quiet: bool,
}

/// The result of running an experiment and writing its outputs.
#[derive(Debug)]
pub struct RunReport {
    pub games: Vec<NamedGame>,
    pub outcomes: Vec<CellOutcome>,
    pub output_dir: PathBuf,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed() > 0 {
            EXIT_CELL_FAILED
        } else {
            EXIT_OK
        }
    }
}

/// Runs every cell of `cfg` and writes the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    let opts = RunOptions { jobs: Some(jobs), output: None, quiet: true };
    execute(cfg, &opts, "run", "config", &mut std::io::sink())
}

fn execute(cfg: &ExperimentConfig, opts: &RunOptions, command: &str, seed_source: &str, err: &mut (dyn Write + Send)) -> Result<RunReport> {
    let games = build_games(cfg)?;
    for g in &games {
        cfg.check_runnable(&g.game)?;
    }
    let cells = plan_cells(cfg);
    let jobs = opts.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let dir = opts.output.clone().unwrap_or_else(|| cfg.output_dir.clone());

    let total = cells.len();
    let done = Mutex::new((0usize, err));
    let quiet = opts.quiet;
    let progress = |o: &CellOutcome| {
        if quiet {
            return;
        }
        let mut guard = done.lock().expect("progress lock");
        guard.0 += 1;
        let k = guard.0;
        let regret = o.last().map(|r| format!("{:.4e}", r.target_regret_full)).unwrap_or_else(|| "-".into());
        let mut line = format!(
            "[{k}/{total}] {}: {} iterations, {}, regret {regret}, {:.2} s",
            o.cell.id,
            o.records.len(),
            o.status(),
            o.wall.as_secs_f64()
        );
        if let Some(e) = &o.error {
            line.push_str(&format!(" ({e})"));
        }
        let _ = writeln!(guard.1, "{line}");
    };
    let outcomes = run_cells(cfg, &games, &cells, jobs, Some(&progress))?;
    let info = ManifestInfo { command, seed_source, jobs };
    let resolved = ExperimentConfig { output_dir: dir.clone(), ..cfg.clone() };
    write_all(&dir, &resolved, &games, &outcomes, &info)?;
    Ok(RunReport { games, outcomes, output_dir: dir })
}

fn compare_preset() -> Vec<MssEntry> {
    let entry = |label: &str, params| MssEntry { label: label.into(), spec: MssSpec::new(params, 0) };
    vec![
        entry("DO_NASH", MssParams::DoNash),
        entry("FP_UNIFORM", MssParams::FpUniform),
        entry("PRD", MssParams::Prd(RdConfig::prd_defaults())),
        MssEntry { label: "RRD".into(), spec: MssSpec::rrd(0.1) },
        entry("QRE", MssParams::Qre(QreConfig::new(10.0))),
    ]
}

fn prepare_sweep(cfg: &mut ExperimentConfig, err: &mut (dyn Write + Send), quiet: bool) -> Result<()> {
    let dropped: Vec<String> = cfg
        .mss
        .iter()
        .filter(|m| !matches!(m.spec.params, MssParams::Rrd { .. }))
        .map(|m| m.label.clone())
        .collect();
    cfg.mss.retain(|m| matches!(m.spec.params, MssParams::Rrd { .. }));
    if !dropped.is_empty() && !quiet {
        let _ = writeln!(err, "sweep: skipping non-RRD entries {dropped:?}");
    }
    if cfg.mss.is_empty() {
        cfg.mss.push(MssEntry { label: "RRD".into(), spec: MssSpec::rrd(0.0) });
    }
    if cfg.lambda_sweep.is_none() {
        cfg.lambda_sweep = Some(DEFAULT_SWEEP.to_vec());
    }
    Ok(())
}

fn io(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

fn print_summary(out: &mut dyn Write, report: &RunReport) -> Result<()> {
    let (outcomes, games) = (&report.outcomes, &report.games);
    writeln!(out, "{:<28} {:<24} {:>5} {:>15} {:>15}", "cell", "game", "iters", "status", "final_regret").map_err(io)?;
    for o in outcomes {
        let regret = o.last().map(|r| format!("{:.6e}", r.target_regret_full)).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:<28} {:<24} {:>5} {:>15} {:>15}",
            o.cell.id,
            games[o.cell.game].name,
            o.records.len(),
            o.status(),
            regret
        )
        .map_err(io)?;
    }
    let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
    writeln!(out, "{} cells, {failed} failed, output in {}", outcomes.len(), report.output_dir.display()).map_err(io)?;
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn print_comparison(out: &mut dyn Write, cfg: &ExperimentConfig, outcomes: &[CellOutcome]) -> Result<()> {
    writeln!(out, "{:<20} {:>6} {:>12} {:>18} {:>10}", "mss", "cells", "mean_iters", "mean_final_regret", "closed").map_err(io)?;
    for (m, entry) in cfg.mss.iter().enumerate() {
        let cells: Vec<&CellOutcome> = outcomes.iter().filter(|o| o.cell.mss == m).collect();
        let closed = cells.iter().filter(|o| o.status() == "EPS_CLOSED").count();
        writeln!(
            out,
            "{:<20} {:>6} {:>12.2} {:>18.6e} {:>10}",
            entry.label,
            cells.len(),
            mean(cells.iter().map(|o| o.records.len() as f64)),
            mean(cells.iter().filter_map(|o| o.last()).map(|r| r.target_regret_full)),
            closed
        )
        .map_err(io)?;
    }
    Ok(())
}

fn print_sweep(out: &mut dyn Write, cfg: &ExperimentConfig, outcomes: &[CellOutcome]) -> Result<()> {
    writeln!(out, "{:<20} {:>8} {:>12} {:>18}", "mss", "lambda", "mean_iters", "mean_final_regret").map_err(io)?;
    for (m, entry) in cfg.mss.iter().enumerate() {
        for &l in cfg.lambda_sweep.as_deref().unwrap_or(&[]) {
            let cells: Vec<&CellOutcome> =
                outcomes.iter().filter(|o| o.cell.mss == m && o.cell.lambda == Some(l)).collect();
            writeln!(
                out,
                "{:<20} {:>8} {:>12.2} {:>18.6e}",
                entry.label,
                l,
                mean(cells.iter().map(|o| o.records.len() as f64)),
                mean(cells.iter().filter_map(|o| o.last()).map(|r| r.target_regret_full))
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

fn print_savings(out: &mut dyn Write, outcomes: &[CellOutcome], games: &[NamedGame]) -> Result<()> {
    for o in outcomes {
        writeln!(out, "cell {} on {}", o.cell.id, games[o.cell.game].name).map_err(io)?;
        writeln!(out, "{:>5} {:>14} {:>10} {:>10} {:>8}", "iter", "strategies", "evaluated", "total_box", "savings").map_err(io)?;
        for r in &o.records {
            let counts: Vec<String> = r.strategy_counts.iter().map(|c| c.to_string()).collect();
            writeln!(
                out,
                "{:>5} {:>14} {:>10} {:>10} {:>7.1}%",
                r.iteration,
                counts.join("x"),
                r.savings.evaluated,
                r.savings.total_box,
                100.0 * r.savings.savings_fraction
            )
            .map_err(io)?;
        }
    }
    Ok(())
}
