//! Expands a config into (MSS, seed, λ) cells and runs them.

use std::time::{Duration, Instant};

use egta_core::empirical::{PayoffEstimator, StrategySets};
use egta_core::game::Game;
use egta_core::meta::{LambdaSchedule, MssParams};
use egta_core::psro::{psro_run, IterationRecord, PsroConfig, TerminatedBy};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Derives an independent seed for the stream `name` of experiment seed
/// `seed`. Distinct (master, name, seed) triples give distinct ChaCha keys.
pub fn stream_seed(master: u64, name: &str, seed: u64) -> u64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(name.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&seed.to_le_bytes());
    ChaCha8Rng::from_seed(key).next_u64()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Debug, Clone)]
pub struct NamedGame {
    pub name: String,
    pub game: Game,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub mss: usize,
    pub seed: u64,
    /// Sweep value replacing the RRD schedule, if any.
    pub lambda: Option<f64>,
    pub game: usize,
    pub id: String,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub records: Vec<IterationRecord>,
    pub terminated_by: Option<TerminatedBy>,
    pub final_sets: Option<StrategySets>,
    pub error: Option<String>,
    pub wall: Duration,
}

impl CellOutcome {
    pub fn status(&self) -> &'static str {
        match self.terminated_by {
            Some(t) => t.name(),
            None => "ERROR",
        }
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Builds every distinct game the experiment needs.
pub fn build_games(cfg: &ExperimentConfig) -> Result<Vec<NamedGame>> {
    let seeds: Vec<u64> = if cfg.game.per_seed() { cfg.seeds.clone() } else { vec![cfg.seeds[0]] };
    seeds
        .into_iter()
        .map(|s| {
            let (name, game) = cfg.game.build(stream_seed(cfg.master_seed, "game", s))?;
            Ok(NamedGame { name, game })
        })
        .collect()
}

/// Cells in output order: MSS entries, then seeds, then sweep values.
pub fn plan_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for (m, entry) in cfg.mss.iter().enumerate() {
        let lambdas: Vec<Option<f64>> = match (&entry.spec.params, &cfg.lambda_sweep) {
            (MssParams::Rrd { .. }, Some(sweep)) => sweep.iter().map(|&l| Some(l)).collect(),
            _ => vec![None],
        };
        for (s, &seed) in cfg.seeds.iter().enumerate() {
            for &lambda in &lambdas {
                let mut id = format!("{}_s{seed}", entry.label);
                if let Some(l) = lambda {
                    id.push_str(&format!("_l{l}"));
                }
                cells.push(Cell {
                    index: cells.len(),
                    mss: m,
                    seed,
                    lambda,
                    game: if cfg.game.per_seed() { s } else { 0 },
                    id,
                });
            }
        }
    }
    cells
}

/// The exact PSRO configuration a cell runs with.
pub fn cell_config(cfg: &ExperimentConfig, cell: &Cell) -> Result<PsroConfig> {
    let master = cfg.master_seed;
    let mut spec = cfg.mss[cell.mss].spec.clone();
    spec.seed = stream_seed(master, "mss", cell.seed);
    if let (Some(l), MssParams::Rrd { schedule, rd }) = (cell.lambda, &mut spec.params) {
        *schedule = LambdaSchedule::constant(l);
        rd.regret_threshold = l;
    }
    let s = &cfg.psro;
    let estimator = PayoffEstimator::new(s.noise_std, s.samples_per_profile, stream_seed(master, "noise", cell.seed))?;
    Ok(PsroConfig {
        max_iterations: s.max_iterations,
        mss: spec,
        estimator,
        epsilon_stop: s.epsilon_stop,
        track_ne_regret: s.track_ne_regret,
        seed: stream_seed(master, "psro", cell.seed),
        oracle: s.oracle,
        bps: s.bps,
    })
}

fn initial_sets(cfg: &ExperimentConfig, game: &Game) -> StrategySets {
    match &cfg.psro.initial {
        Some(init) => StrategySets::singletons(init),
        None => StrategySets::singletons(&vec![0; game.num_players()]),
    }
}

pub fn run_cell(cfg: &ExperimentConfig, games: &[NamedGame], cell: &Cell) -> CellOutcome {
    let start = Instant::now();
    let game = &games[cell.game].game;
    let result = cell_config(cfg, cell)
        .map_err(|e| (e.to_string(), Vec::new()))
        .and_then(|pc| psro_run(game, initial_sets(cfg, game), &pc).map_err(|e| (e.to_string(), e.records)));
    let wall = start.elapsed();
    match result {
        Ok(trace) => CellOutcome {
            cell: cell.clone(),
            records: trace.records,
            terminated_by: Some(trace.terminated_by),
            final_sets: Some(trace.final_sets),
            error: None,
            wall,
        },
        Err((message, records)) => CellOutcome {
            cell: cell.clone(),
            records,
            terminated_by: None,
            final_sets: None,
            error: Some(message),
            wall,
        },
    }
}

/// Runs all cells on at most `jobs` threads. Outcomes come back in cell
/// order regardless of scheduling.
pub fn run_cells(
    cfg: &ExperimentConfig,
    games: &[NamedGame],
    cells: &[Cell],
    jobs: usize,
    progress: Option<&(dyn Fn(&CellOutcome) + Sync)>,
) -> Result<Vec<CellOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let outcome = run_cell(cfg, games, cell);
                if let Some(report) = progress {
                    report(&outcome);
                }
                outcome
            })
            .collect()
    }))
}
