//! The PSRO outer loop with an exact best-response oracle.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bps::{bps, bps_rrd_target, savings_report, BpsConfig, SavingsReport};
use crate::empirical::{EmpiricalGame, PayoffEstimator, StrategySets};
use crate::error::{Error, Result};
use crate::game::{argmax_lowest, Game, MixedProfile};
use crate::meta::{lambda_at, solve_mss, MssKind, MssOutcome, MssParams, MssSpec};
use crate::solvers::{nash_np, NashConfig, RdConfig};

/// How the oracle picks a best response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// Exact argmax over the full strategy set; a response already in the
    /// empirical set adds nothing.
    #[default]
    Argmax,
    /// When the argmax is already in the empirical set, respond with the
    /// best strategy outside it instead.
    ForceOutside,
    /// Respond to one pure opponent profile drawn from the target, as a
    /// learned oracle training on sampled episodes would. Draws come from
    /// a stream keyed by `PsroConfig::seed` and the iteration.
    SampledProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsroConfig {
    pub max_iterations: usize,
    pub mss: MssSpec,
    pub estimator: PayoffEstimator,
    pub epsilon_stop: f64,
    pub track_ne_regret: bool,
    /// Seeds the draws of [`OracleMode::SampledProfile`].
    pub seed: u64,
    pub oracle: OracleMode,
    /// When set, profiles are evaluated lazily by backward profile search
    /// instead of filling the whole box. Supported with DO_NASH, RRD,
    /// FP_UNIFORM and LAST_STRATEGY.
    pub bps: Option<BpsConfig>,
}

impl PsroConfig {
    pub fn new(mss: MssSpec, max_iterations: usize) -> Self {
        PsroConfig {
            max_iterations,
            mss,
            estimator: PayoffEstimator::exact(),
            epsilon_stop: 1e-6,
            track_ne_regret: false,
            seed: 0,
            oracle: OracleMode::Argmax,
            bps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.epsilon_stop >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_stop must be non-negative, got {}",
                self.epsilon_stop
            )));
        }
        self.mss.validate()?;
        if self.bps.is_some()
            && !matches!(
                self.mss.kind(),
                MssKind::DoNash | MssKind::Rrd | MssKind::FpUniform | MssKind::LastStrategy
            )
        {
            return Err(Error::InvalidConfig(format!(
                "backward profile search does not support {}",
                self.mss.kind()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Set sizes after this iteration's additions.
    pub strategy_counts: Vec<usize>,
    /// Target computed at the end of the iteration, over set positions.
    pub target: MixedProfile,
    /// The target embedded in the full strategy space.
    pub target_full: MixedProfile,
    pub target_regret_full: f64,
    /// Full-game regret of the empirical-game equilibrium.
    pub ne_regret_full: Option<f64>,
    /// Strategy added per player this iteration.
    pub new_strategies: Vec<Option<usize>>,
    pub profiles_evaluated_cum: usize,
    pub lambda_used: Option<f64>,
    /// RRD: whether the solver met its threshold this iteration.
    pub mss_hit_threshold: Option<bool>,
    pub qre_residual: Option<f64>,
    pub savings: SavingsReport,
    /// Set when BPS ran and could not confirm its solution.
    pub bps_unconfirmed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminatedBy {
    EpsClosed,
    MaxIterations,
}

impl TerminatedBy {
    pub fn name(self) -> &'static str {
        match self {
            TerminatedBy::EpsClosed => "EPS_CLOSED",
            TerminatedBy::MaxIterations => "MAX_ITERATIONS",
        }
    }
}

impl fmt::Display for TerminatedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub terminated_by: TerminatedBy,
    pub final_sets: StrategySets,
}

/// A failed run with everything recorded before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("PSRO failed at iteration {iteration}: {source}")]
pub struct PsroError {
    pub iteration: usize,
    pub source: Error,
    pub records: Vec<IterationRecord>,
    pub sets: StrategySets,
}

/// Best response of `player` to `target_full`, optionally forced outside
/// the empirical set.
fn best_response(full: &Game, target_full: &MixedProfile, sets: &StrategySets, player: usize, mode: OracleMode) -> usize {
    debug_assert!(mode != OracleMode::SampledProfile, "sampled responses go through sample_profile first");
    let dev = full.deviation_payoffs(target_full, player).expect("target matches the full game");
    let best = argmax_lowest(&dev);
    if mode == OracleMode::ForceOutside && sets.contains(player, best) {
        let outside: Vec<usize> = (0..dev.len()).filter(|&s| !sets.contains(player, s)).collect();
        if let Some(k) = argmax_over(&dev, &outside) {
            return k;
        }
    }
    best
}

/// One pure profile drawn from `target`, as a degenerate mixed profile.
fn sample_profile(target: &MixedProfile, seed: u64, iteration: usize) -> MixedProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    let pure: Vec<usize> = target
        .strategies()
        .iter()
        .map(|s| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let probs = s.probs();
            probs
                .iter()
                .position(|&p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or_else(|| probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
        })
        .collect();
    MixedProfile::pure(&target.counts(), &pure)
}

fn argmax_over(values: &[f64], candidates: &[usize]) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    let sub: Vec<f64> = candidates.iter().map(|&s| values[s]).collect();
    Some(candidates[argmax_lowest(&sub)])
}

/// True iff every player's exact best response to `target` is already in
/// the empirical sets and `target` has regret at most `eps` in the
/// restricted game.
pub fn epsilon_closed(full: &Game, emp: &EmpiricalGame, target: &MixedProfile, eps: f64) -> Result<bool> {
    let sets = emp.sets();
    let lifted = sets.lift(target, full.strategy_counts());
    full.check_profile(&lifted)?;
    let inside = (0..full.num_players())
        .all(|i| sets.contains(i, best_response(full, &lifted, sets, i, OracleMode::Argmax)));
    if !inside {
        return Ok(false);
    }
    // estimated payoffs when the box is complete, true payoffs otherwise
    let restricted = match emp.restricted_game() {
        Ok(game) => game,
        Err(Error::MissingProfile { .. }) => crate::empirical::restrict(full, sets)?,
        Err(e) => return Err(e),
    };
    Ok(restricted.regret(target)?.total <= eps)
}

struct Targets {
    outcome: MssOutcome,
    ne: Option<MixedProfile>,
    unconfirmed: bool,
}

fn compute_target(cfg: &PsroConfig, emp: &mut EmpiricalGame, iteration: usize) -> Result<Targets> {
    let Some(bcfg) = &cfg.bps else {
        let outcome = solve_mss(&cfg.mss, emp, iteration)?;
        let ne = if !cfg.track_ne_regret {
            None
        } else if cfg.mss.kind() == MssKind::DoNash {
            Some(outcome.profile.clone())
        } else {
            let nash = NashConfig { seed: cfg.mss.seed, ..cfg.mss.nash };
            Some(nash_np(&emp.restricted_game()?, &nash)?.profile)
        };
        return Ok(Targets { outcome, ne, unconfirmed: false });
    };
    let bcfg = BpsConfig { nash: NashConfig { seed: cfg.mss.seed, ..cfg.mss.nash }, ..*bcfg };
    match &cfg.mss.params {
        MssParams::Rrd { schedule, rd } => {
            let lambda = lambda_at(schedule, iteration);
            let rd = RdConfig { regret_threshold: lambda, ..*rd };
            let (target, search, res) = bps_rrd_target(emp, &cfg.estimator, &rd, &bcfg)?;
            Ok(Targets {
                outcome: MssOutcome {
                    profile: target,
                    lambda: Some(lambda),
                    residual: None,
                    hit_threshold: Some(res.hit_threshold),
                },
                ne: cfg.track_ne_regret.then_some(search.profile),
                unconfirmed: !search.confirmed,
            })
        }
        MssParams::DoNash => {
            let search = bps(emp, &cfg.estimator, &bcfg)?;
            Ok(Targets {
                outcome: MssOutcome { profile: search.profile.clone(), lambda: None, residual: None, hit_threshold: None },
                ne: cfg.track_ne_regret.then_some(search.profile),
                unconfirmed: !search.confirmed,
            })
        }
        _ => {
            let outcome = solve_mss(&cfg.mss, emp, iteration)?;
            let ne = if cfg.track_ne_regret { Some(bps(emp, &cfg.estimator, &bcfg)?.profile) } else { None };
            Ok(Targets { outcome, ne, unconfirmed: false })
        }
    }
}

/// Runs PSRO on `full` from `initial`.
///
/// Iteration `t` best-responds to the previous target (uniform over the
/// initial sets at `t = 1`), adds the responses, evaluates the new
/// profiles and computes the next target. The run stops as EPS_CLOSED as
/// soon as every best response to the new target is already present and
/// its full-game regret is at most `epsilon_stop`.
pub fn psro_run(full: &Game, initial: StrategySets, cfg: &PsroConfig) -> std::result::Result<RunTrace, PsroError> {
    let mut records = Vec::new();
    let fail = |iteration: usize, source: Error, records: Vec<IterationRecord>, sets: StrategySets| PsroError {
        iteration,
        source,
        records,
        sets,
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(0, e, records, initial));
    }
    let mut emp = match EmpiricalGame::new(full, initial.clone()) {
        Ok(emp) => emp,
        Err(e) => return Err(fail(0, e, records, initial)),
    };
    let n = full.num_players();
    let mut target_full = initial.lift(&MixedProfile::uniform(&initial.counts()), full.strategy_counts());

    for iteration in 1..=cfg.max_iterations {
        let responses: Vec<usize> = match cfg.oracle {
            OracleMode::SampledProfile => {
                let drawn = sample_profile(&target_full, cfg.seed, iteration);
                (0..n).map(|i| best_response(full, &drawn, emp.sets(), i, OracleMode::Argmax)).collect()
            }
            mode => (0..n).map(|i| best_response(full, &target_full, emp.sets(), i, mode)).collect(),
        };
        let mut new_strategies = vec![None; n];
        for (i, &s) in responses.iter().enumerate() {
            match emp.add_strategy(i, s, iteration) {
                Ok(true) => new_strategies[i] = Some(s),
                Ok(false) => {}
                Err(e) => return Err(fail(iteration, e, records, emp.sets().clone())),
            }
        }
        if cfg.bps.is_none() {
            emp.fill_missing(&cfg.estimator);
        }
        let targets = match compute_target(cfg, &mut emp, iteration) {
            Ok(t) => t,
            Err(e) => return Err(fail(iteration, e, records, emp.sets().clone())),
        };
        let sets = emp.sets().clone();
        target_full = sets.lift(&targets.outcome.profile, full.strategy_counts());
        let target_regret_full = full.regret(&target_full).expect("lifted target is valid").total;
        let ne_regret_full = targets.ne.as_ref().map(|ne| {
            full.regret(&sets.lift(ne, full.strategy_counts())).expect("lifted profile is valid").total
        });
        records.push(IterationRecord {
            iteration,
            strategy_counts: sets.counts(),
            target: targets.outcome.profile,
            target_full: target_full.clone(),
            target_regret_full,
            ne_regret_full,
            new_strategies,
            profiles_evaluated_cum: emp.evaluated_count(),
            lambda_used: targets.outcome.lambda,
            mss_hit_threshold: targets.outcome.hit_threshold,
            qre_residual: targets.outcome.residual,
            savings: savings_report(&emp),
            bps_unconfirmed: targets.unconfirmed,
        });

        let closed = (0..n).all(|i| sets.contains(i, best_response(full, &target_full, &sets, i, OracleMode::Argmax)))
            && target_regret_full <= cfg.epsilon_stop;
        if closed {
            return Ok(RunTrace { records, terminated_by: TerminatedBy::EpsClosed, final_sets: sets });
        }
    }
    Ok(RunTrace { records, terminated_by: TerminatedBy::MaxIterations, final_sets: emp.sets().clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::{make_long_path_game, make_mrcp_closed_game};

    #[test]
    fn full_sets_close_immediately() {
        let g = make_mrcp_closed_game();
        let trace = psro_run(&g, StrategySets::full(&[3, 3]), &PsroConfig::new(MssSpec::do_nash(), 10)).unwrap();
        assert_eq!(trace.terminated_by, TerminatedBy::EpsClosed);
        assert_eq!(trace.records.len(), 1);
        assert!(trace.records[0].target_regret_full <= 1e-6);
    }

    #[test]
    fn double_oracle_walks_the_diagonal() {
        let n = 20;
        let g = make_long_path_game(n).unwrap();
        let trace = psro_run(&g, StrategySets::singletons(&[0, 0]), &PsroConfig::new(MssSpec::do_nash(), 50)).unwrap();
        for (k, rec) in trace.records.iter().enumerate() {
            if k + 1 < n {
                assert_eq!(rec.new_strategies, vec![Some(k + 1), Some(k + 1)], "iteration {}", k + 1);
            }
        }
        assert_eq!(trace.terminated_by, TerminatedBy::EpsClosed);
        assert_eq!(trace.records.len(), n - 1);
    }

    #[test]
    fn epsilon_closed_cases() {
        let g = make_mrcp_closed_game();
        let mut emp = EmpiricalGame::new(&g, StrategySets::new(vec![vec![0, 1], vec![0, 1]]).unwrap()).unwrap();
        emp.fill_missing(&PayoffEstimator::exact());
        let corner = MixedProfile::pure(&[2, 2], &[0, 0]);
        assert!(epsilon_closed(&g, &emp, &corner, 2.0).unwrap());
        assert!(!epsilon_closed(&g, &emp, &corner, 1.9).unwrap());
        let block_ne = MixedProfile::pure(&[2, 2], &[1, 1]);
        assert!(!epsilon_closed(&g, &emp, &block_ne, 100.0).unwrap());

        let full = EmpiricalGame::new(&g, StrategySets::full(&[3, 3])).unwrap();
        assert!(epsilon_closed(&g, &full, &MixedProfile::pure(&[3, 3], &[2, 2]), 0.0).unwrap());
    }

    #[test]
    fn invalid_config_reports_iteration_zero() {
        let g = make_mrcp_closed_game();
        let err = psro_run(&g, StrategySets::singletons(&[0, 0]), &PsroConfig::new(MssSpec::do_nash(), 0)).unwrap_err();
        assert_eq!(err.iteration, 0);
        assert!(err.records.is_empty());
    }

    #[test]
    fn sampled_oracle_is_seeded() {
        let g = make_long_path_game(12).unwrap();
        let run = |seed| {
            let mut cfg = PsroConfig::new(MssSpec::do_nash(), 8);
            cfg.oracle = OracleMode::SampledProfile;
            cfg.seed = seed;
            psro_run(&g, StrategySets::singletons(&[0, 0]), &cfg).unwrap()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        let drawn = sample_profile(&MixedProfile::uniform(&[4, 5]), 9, 2);
        assert!(drawn.strategies().iter().all(|s| s.probs().iter().filter(|&&p| p == 1.0).count() == 1));
    }
}
