//! The `solve` subcommand: one solver on one game file.

use std::io::Write;
use std::path::Path;

use egta_core::empirical::StrategySets;
use egta_core::factory::load_game;
use egta_core::game::{Game, MixedProfile};
use egta_core::solvers::{mrcp, nash_2p, nash_np, prd, qre_logit, rrd, MrcpConfig, NashConfig, QreConfig, RdConfig};

use crate::error::{CliError, Result};
use crate::SolverName;

/// Parses "0,1;0,2" into per-player strategy lists.
pub(crate) fn parse_sets(text: &str) -> Result<StrategySets> {
    let sets = text
        .split(';')
        .map(|player| {
            player
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("--sets: bad strategy {t:?}"))))
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategySets::new(sets)?)
}

pub(crate) fn solve(
    path: &Path,
    solver: SolverName,
    lambda: Option<f64>,
    tau: Option<f64>,
    sets: Option<&str>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<()> {
    let game = load_game(path).map_err(|source| CliError::GameFile { path: path.to_path_buf(), source })?;
    let flag_misuse = |flag: &str| CliError::Usage(format!("{flag} does not apply to --solver {solver:?}").to_lowercase());
    if lambda.is_some() && solver != SolverName::Rrd {
        return Err(flag_misuse("--lambda"));
    }
    if tau.is_some() && solver != SolverName::Qre {
        return Err(flag_misuse("--tau"));
    }
    if sets.is_some() && solver != SolverName::Mrcp {
        return Err(flag_misuse("--sets"));
    }

    let mut notes = Vec::new();
    let profile = match solver {
        SolverName::Nash => {
            if game.num_players() == 2 {
                nash_2p(&game)?
            } else {
                nash_np(&game, &NashConfig { seed, ..NashConfig::default() })?.profile
            }
        }
        SolverName::Rrd => {
            let lambda = lambda.ok_or_else(|| CliError::Usage("--solver rrd needs --lambda".into()))?;
            let res = rrd(&game, &RdConfig::with_threshold(lambda))?;
            notes.push(format!("steps {}", res.steps_used));
            notes.push(format!("hit_threshold {}", res.hit_threshold));
            res.profile
        }
        SolverName::Prd => {
            let res = prd(&game, &RdConfig::prd_defaults())?;
            notes.push(format!("steps {}", res.steps_used));
            res.profile
        }
        SolverName::Qre => {
            let tau = tau.ok_or_else(|| CliError::Usage("--solver qre needs --tau".into()))?;
            let res = qre_logit(&game, &QreConfig::new(tau))?;
            notes.push(format!("residual {}", res.residual.unwrap_or(f64::NAN)));
            res.profile
        }
        SolverName::Mrcp => {
            let sets = match sets {
                Some(text) => parse_sets(text)?,
                None => StrategySets::full(game.strategy_counts()),
            };
            sets.validate_for(&game)?;
            let res = mrcp(&game, &sets, &MrcpConfig { seed, ..MrcpConfig::default() })?;
            sets.lift(&res.profile, game.strategy_counts())
        }
    };
    report(out, &game, &profile, &notes).map_err(|e| CliError::io("<stdout>", e))
}

fn report(out: &mut dyn Write, game: &Game, profile: &MixedProfile, notes: &[String]) -> std::io::Result<()> {
    for (i, s) in profile.strategies().iter().enumerate() {
        let probs: Vec<String> = s.probs().iter().map(|p| format!("{p:.6}")).collect();
        writeln!(out, "player {} {}", i + 1, probs.join(" "))?;
    }
    if let Some(pure) = profile.as_pure() {
        let labels: Vec<String> = pure.iter().map(|s| s.to_string()).collect();
        writeln!(out, "pure ({})", labels.join(", "))?;
    }
    let regret = game.regret(profile).expect("solver output matches the game");
    let per: Vec<String> = regret.per_player.iter().map(|r| r.to_string()).collect();
    writeln!(out, "regret {}", regret.total)?;
    writeln!(out, "regret_per_player {}", per.join(" "))?;
    for n in notes {
        writeln!(out, "{n}")?;
    }
    Ok(())
}
