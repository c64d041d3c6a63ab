//! Backward profile search: confirm an equilibrium of the empirical game
//! while evaluating only part of its payoff tensor.
//!
//! The search starts from the subgame spanned by each player's most
//! recently added strategy, solves it, and checks one-player deviations
//! into the rest of the empirical sets. Profitable outside deviations
//! grow the subgame until none remain.

use crate::empirical::{EmpiricalGame, PayoffEstimator, StrategySets};
use crate::error::{Error, Result};
use crate::game::{argmax_lowest, dot, MixedProfile};
use crate::solvers::{nash_np, rrd, NashConfig, RdConfig, SolverResult};

/// Probability below which a strategy counts as off-support.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpsConfig {
    /// Minimum deviation gain that triggers expansion. With noisy
    /// payoffs this has to be at least the noise scale.
    pub tol: f64,
    pub nash: NashConfig,
}

impl Default for BpsConfig {
    fn default() -> Self {
        BpsConfig { tol: 1e-6, nash: NashConfig::default() }
    }
}

impl BpsConfig {
    pub fn with_tol(tol: f64) -> Self {
        BpsConfig { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgame {
    pub sets: StrategySets,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpsResult {
    /// Indexed by positions in the empirical sets, zero outside `subgame`.
    pub profile: MixedProfile,
    pub subgame: Subgame,
    pub evaluations_this_call: usize,
    pub confirmed: bool,
    /// Largest deviation gain over the empirical sets at the returned profile.
    pub max_gain: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavingsReport {
    pub evaluated: usize,
    pub total_box: usize,
    pub savings_fraction: f64,
}

/// Evaluated profiles versus the box size of the empirical sets.
pub fn savings_report(emp: &EmpiricalGame) -> SavingsReport {
    savings(emp.evaluated_count(), emp.sets().box_size())
}

pub(crate) fn savings(evaluated: usize, total_box: usize) -> SavingsReport {
    SavingsReport {
        evaluated,
        total_box,
        savings_fraction: 1.0 - evaluated as f64 / total_box as f64,
    }
}

struct Deviation {
    /// Best deviation per player, as a position in the empirical sets.
    best: Vec<usize>,
    gain: Vec<f64>,
    /// Per player, per position: gain of switching to that strategy.
    all_gains: Vec<Vec<f64>>,
}

/// Evaluates every profile needed for the one-player deviation payoffs
/// against `sigma` (a profile over empirical positions) and returns them.
fn deviations(emp: &mut EmpiricalGame, est: &PayoffEstimator, sigma: &MixedProfile) -> Result<Deviation> {
    let sets = emp.sets().clone();
    let n = sets.num_players();
    let supports: Vec<Vec<usize>> = sigma
        .strategies()
        .iter()
        .map(|s| s.support(0.0))
        .collect();
    let mut best = Vec::with_capacity(n);
    let mut gain = Vec::with_capacity(n);
    let mut all_gains = Vec::with_capacity(n);
    for i in 0..n {
        let mut values = vec![0.0; sets.len(i)];
        for (k, value) in values.iter_mut().enumerate() {
            // odometer over the support product of the other players
            let mut cursor = vec![0usize; n];
            loop {
                let mut positions = vec![0usize; n];
                let mut w = 1.0;
                for j in 0..n {
                    if j == i {
                        positions[j] = k;
                    } else {
                        positions[j] = supports[j][cursor[j]];
                        w *= sigma.strategy(j)[positions[j]];
                    }
                }
                let profile = sets.to_full(&positions);
                *value += w * emp.evaluate(est, &profile)?[i];
                let mut j = n;
                let done = loop {
                    if j == 0 {
                        break true;
                    }
                    j -= 1;
                    if j == i {
                        continue;
                    }
                    cursor[j] += 1;
                    if cursor[j] < supports[j].len() {
                        break false;
                    }
                    cursor[j] = 0;
                };
                if done {
                    break;
                }
            }
        }
        let own = dot(sigma.strategy(i).probs(), &values);
        let b = argmax_lowest(&values);
        gain.push((values[b] - own).max(0.0));
        best.push(b);
        all_gains.push(values.iter().map(|v| v - own).collect());
    }
    Ok(Deviation { best, gain, all_gains })
}

fn solve_subgame(emp: &EmpiricalGame, z: &StrategySets, nash: &NashConfig) -> Result<(MixedProfile, SolverResult)> {
    let game = emp.to_game(z)?;
    let res = nash_np(&game, nash)?;
    let lifted = z.embed(&res.profile, emp.sets())?;
    Ok((lifted, res))
}

/// Backward profile search seeded from the most recently added strategies.
pub fn bps(emp: &mut EmpiricalGame, est: &PayoffEstimator, cfg: &BpsConfig) -> Result<BpsResult> {
    if !(cfg.tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("bps tol must be non-negative, got {}", cfg.tol)));
    }
    let before = emp.evaluated_count();
    let n = emp.sets().num_players();
    let recent: Vec<usize> = (0..n).map(|i| emp.sets().most_recent(i)).collect();
    let mut z = StrategySets::singletons(&recent);
    let mut warnings = Vec::new();
    let mut resolved_for: Option<StrategySets> = None;
    let mut nash = cfg.nash;

    loop {
        emp.fill_box(&z, est)?;
        let (sigma, res) = solve_subgame(emp, &z, &nash)?;
        if res.regret_total > 10.0 * cfg.tol {
            warnings.push(format!(
                "subgame solver regret {:.3e} exceeds 10 x tol on subgame of size {:?}",
                res.regret_total,
                z.counts()
            ));
        }
        let dev = deviations(emp, est, &sigma)?;
        let sets = emp.sets().clone();
        let mut expanded = false;
        let mut inside_violation = Vec::new();
        for i in 0..n {
            if dev.gain[i] <= cfg.tol {
                continue;
            }
            let s = sets.strategy_at(i, dev.best[i]);
            if z.contains(i, s) {
                inside_violation.push(i);
            } else {
                z.add(i, s, 0);
                expanded = true;
            }
        }
        if expanded {
            nash = cfg.nash;
            continue;
        }
        if inside_violation.is_empty() {
            return Ok(finish(emp, before, sigma, z, true, &dev, warnings));
        }
        // the subgame solution is imperfect: re-solve once with a fresh
        // seed and more restarts, then fall back to the best outside move
        if resolved_for.as_ref() != Some(&z) {
            resolved_for = Some(z.clone());
            nash = NashConfig {
                seed: cfg.nash.seed.wrapping_add(1),
                restarts: cfg.nash.restarts * 2,
                ..cfg.nash
            };
            continue;
        }
        for &i in &inside_violation {
            let outside = (0..sets.len(i))
                .filter(|&k| !z.contains(i, sets.strategy_at(i, k)))
                .filter(|&k| dev.all_gains[i][k] > cfg.tol)
                .max_by(|&a, &b| dev.all_gains[i][a].total_cmp(&dev.all_gains[i][b]).then(b.cmp(&a)));
            if let Some(k) = outside {
                z.add(i, sets.strategy_at(i, k), 0);
                expanded = true;
            }
        }
        if expanded {
            nash = cfg.nash;
            continue;
        }
        warnings.push(format!(
            "players {inside_violation:?} keep a profitable deviation inside the subgame; returning unconfirmed"
        ));
        return Ok(finish(emp, before, sigma, z, false, &dev, warnings));
    }
}

fn finish(
    emp: &EmpiricalGame,
    before: usize,
    profile: MixedProfile,
    z: StrategySets,
    confirmed: bool,
    dev: &Deviation,
    warnings: Vec<String>,
) -> BpsResult {
    let complete = emp.is_complete(&z).unwrap_or(false);
    BpsResult {
        profile,
        subgame: Subgame { sets: z, complete },
        evaluations_this_call: emp.evaluated_count() - before,
        confirmed,
        max_gain: dev.gain.iter().copied().fold(0.0, f64::max),
        warnings,
    }
}

/// Runs [`bps`], then RRD on the sub-box spanned by the support of the
/// confirmed solution. Returns the RRD profile over the empirical sets
/// alongside the search result and the RRD diagnostics.
pub fn bps_rrd_target(
    emp: &mut EmpiricalGame,
    est: &PayoffEstimator,
    rd: &RdConfig,
    cfg: &BpsConfig,
) -> Result<(MixedProfile, BpsResult, SolverResult)> {
    let result = bps(emp, est, cfg)?;
    let sets = emp.sets().clone();
    let support: Vec<Vec<usize>> = (0..sets.num_players())
        .map(|i| {
            result
                .profile
                .strategy(i)
                .support(SUPPORT_THRESHOLD)
                .into_iter()
                .map(|k| sets.strategy_at(i, k))
                .collect()
        })
        .collect();
    let support = StrategySets::new(support)?;
    let game = emp.to_game(&support)?;
    let res = rrd(&game, rd)?;
    let target = support.embed(&res.profile, &sets)?;
    Ok((target, result, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Game;

    #[test]
    fn savings_formula() {
        let r = savings(880, 1000);
        assert!((r.savings_fraction - 0.12).abs() < 1e-12);
        assert_eq!(format!("{:.1}%", 100.0 * r.savings_fraction), "12.0%");
        assert_eq!(savings(9, 9).savings_fraction, 0.0);
    }

    #[test]
    fn singleton_sets_confirm_trivially() {
        let g = Game::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut emp = EmpiricalGame::new(&g, StrategySets::singletons(&[1, 0])).unwrap();
        let res = bps(&mut emp, &PayoffEstimator::exact(), &BpsConfig::default()).unwrap();
        assert!(res.confirmed);
        assert_eq!(res.evaluations_this_call, 1);
        assert_eq!(res.profile, MixedProfile::pure(&[1, 1], &[0, 0]));
    }

    #[test]
    fn strict_recent_equilibrium_needs_only_deviation_cells() {
        // coordination game on the diagonal; the newest strategies form
        // a strict equilibrium of the 4x4 empirical game
        let g = Game::from_fn(vec![4, 4], |p| {
            let v = if p[0] == p[1] { 1.0 + p[0] as f64 } else { 0.0 };
            vec![v, v]
        })
        .unwrap();
        let mut sets = StrategySets::new(vec![vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
        sets.add(0, 3, 2);
        sets.add(1, 3, 2);
        let mut emp = EmpiricalGame::new(&g, sets).unwrap();
        let res = bps(&mut emp, &PayoffEstimator::exact(), &BpsConfig::default()).unwrap();
        assert!(res.confirmed);
        assert_eq!(res.evaluations_this_call, 1 + 3 + 3);
        assert_eq!(res.profile.as_pure(), Some(vec![3, 3]));
        let report = savings_report(&emp);
        assert_eq!((report.evaluated, report.total_box), (7, 16));
    }

    #[test]
    fn pure_support_rrd_is_unchanged() {
        let g = Game::from_fn(vec![3, 3], |p| {
            let v = if p[0] == p[1] { 1.0 } else { 0.0 };
            vec![v, v]
        })
        .unwrap();
        let mut emp = EmpiricalGame::new(&g, StrategySets::full(&[3, 3])).unwrap();
        let (target, res, rd) =
            bps_rrd_target(&mut emp, &PayoffEstimator::exact(), &RdConfig::with_threshold(0.1), &BpsConfig::default())
                .unwrap();
        assert!(res.confirmed);
        assert_eq!(rd.steps_used, 0);
        assert_eq!(target, res.profile);
    }
}
