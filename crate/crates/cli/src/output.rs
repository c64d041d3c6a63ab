//! Files written into the output directory:
//!
//! - `trace.csv`: one row per cell iteration, in cell order
//! - `manifest.txt`: resolved config and per-cell status and wall time
//! - `games/<game>.game`: every full game used
//! - `targets/<cell>/<iteration>.profile`: full-game targets, one player per line

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use egta_core::game::{write_game, MixedProfile};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{CellOutcome, NamedGame};

pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn trace_header(num_players: usize) -> Vec<String> {
    let mut header: Vec<String> = ["game", "mss", "seed", "lambda", "iteration"].map(String::from).to_vec();
    header.extend((1..=num_players).map(|i| format!("num_strategies_p{i}")));
    header.extend(
        ["target_regret_full", "ne_regret_full", "profiles_evaluated", "terminated_by"].map(String::from),
    );
    header
}

pub fn write_trace<W: Write>(out: W, cfg: &ExperimentConfig, games: &[NamedGame], outcomes: &[CellOutcome]) -> Result<()> {
    let n = games.iter().map(|g| g.game.num_players()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(n))?;
    for o in outcomes {
        let game = &games[o.cell.game].name;
        let label = &cfg.mss[o.cell.mss].label;
        for r in &o.records {
            let mut row = vec![
                game.clone(),
                label.clone(),
                o.cell.seed.to_string(),
                r.lambda_used.map(|l| l.to_string()).unwrap_or_default(),
                r.iteration.to_string(),
            ];
            row.extend((0..n).map(|i| r.strategy_counts.get(i).map(|c| c.to_string()).unwrap_or_default()));
            row.push(r.target_regret_full.to_string());
            row.push(r.ne_regret_full.map(|x| x.to_string()).unwrap_or_default());
            row.push(r.profiles_evaluated_cum.to_string());
            row.push(o.status().to_string());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| CliError::io(TRACE_FILE, e))?;
    Ok(())
}

/// One line per player, 17 significant digits.
pub fn format_profile(profile: &MixedProfile) -> String {
    let mut s = String::new();
    for strategy in profile.strategies() {
        let line: Vec<String> = strategy.probs().iter().map(|p| format!("{p:.16e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_profile(text: &str) -> std::result::Result<MixedProfile, String> {
    let probs = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect())
        .collect::<std::result::Result<Vec<Vec<f64>>, String>>()?;
    MixedProfile::from_vecs(probs).map_err(|e| e.to_string())
}

pub fn game_path(dir: &Path, game: &NamedGame) -> PathBuf {
    dir.join("games").join(format!("{}.game", game.name))
}

pub fn target_path(dir: &Path, cell_id: &str, iteration: usize) -> PathBuf {
    dir.join("targets").join(cell_id).join(format!("{iteration}.profile"))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_games(dir: &Path, games: &[NamedGame]) -> Result<()> {
    for g in games {
        let mut buf = Vec::new();
        write_game(&g.game, &mut buf).map_err(|e| CliError::io(game_path(dir, g), e))?;
        write_file(&game_path(dir, g), &buf)?;
    }
    Ok(())
}

pub fn write_targets(dir: &Path, outcomes: &[CellOutcome]) -> Result<()> {
    for o in outcomes {
        for r in &o.records {
            write_file(&target_path(dir, &o.cell.id, r.iteration), format_profile(&r.target_full).as_bytes())?;
        }
    }
    Ok(())
}

pub struct ManifestInfo<'a> {
    pub command: &'a str,
    pub seed_source: &'a str,
    pub jobs: usize,
}

pub fn manifest(cfg: &ExperimentConfig, games: &[NamedGame], outcomes: &[CellOutcome], info: &ManifestInfo) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {}", info.command);
    let _ = writeln!(s, "master_seed_source = {}", info.seed_source);
    let _ = writeln!(s, "jobs = {}", info.jobs);
    let _ = write!(s, "{cfg}");
    for g in games {
        let _ = writeln!(s, "game_file {} = games/{}.game", g.name, g.name);
    }
    for o in outcomes {
        let _ = write!(
            s,
            "cell {} index={} game={} iterations={} status={} wall_ms={:.3}",
            o.cell.id,
            o.cell.index,
            games[o.cell.game].name,
            o.records.len(),
            o.status(),
            o.wall.as_secs_f64() * 1e3
        );
        if let Some(last) = o.last() {
            let _ = write!(s, " final_regret={}", last.target_regret_full);
        }
        if let Some(err) = &o.error {
            let _ = write!(s, " error={err:?}");
        }
        s.push('\n');
    }
    s
}

/// Writes games, targets, trace and manifest into `dir`.
pub fn write_all(
    dir: &Path,
    cfg: &ExperimentConfig,
    games: &[NamedGame],
    outcomes: &[CellOutcome],
    info: &ManifestInfo,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_games(dir, games)?;
    write_targets(dir, outcomes)?;
    let mut trace = Vec::new();
    write_trace(&mut trace, cfg, games, outcomes)?;
    write_file(&dir.join(TRACE_FILE), &trace)?;
    write_file(&dir.join(MANIFEST_FILE), manifest(cfg, games, outcomes, info).as_bytes())
}
