use std::ops::ControlFlow;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::game::{regret_from_deviations, Game, MixedProfile, MixedStrategy};

use super::lp::maximin;
use super::newton::{payoff_scale, solve_on_supports};
use super::rd::update;
use super::SolverResult;

/// Parameters of the n-player equilibrium search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashConfig {
    /// Replicator restarts: one uniform start plus `restarts - 1`
    /// Dirichlet(1, ..., 1) starts.
    pub restarts: usize,
    pub seed: u64,
    /// Replicator steps per restart.
    pub rd_steps: usize,
    /// Number of support combinations tried by Newton before falling
    /// back to replicator restarts.
    pub support_budget: usize,
}

impl Default for NashConfig {
    fn default() -> Self {
        NashConfig {
            restarts: 8,
            seed: 0,
            rd_steps: 10_000,
            support_budget: 20_000,
        }
    }
}

impl NashConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("nash restarts must be at least 1".into()));
        }
        Ok(())
    }
}

fn accept_tol(game: &Game) -> f64 {
    1e-10 * payoff_scale(game)
}

fn total_regret(game: &Game, profile: &MixedProfile) -> f64 {
    regret_from_deviations(profile, &game.all_deviation_payoffs(profile)).total
}

fn first_pure_equilibrium(game: &Game) -> Option<MixedProfile> {
    game.profiles()
        .find(|p| game.is_pure_equilibrium(p, 0.0))
        .map(|p| MixedProfile::pure(game.strategy_counts(), &p))
}

/// Visits support tuples in increasing total size. Within a total, size
/// vectors with the smallest spread between players come first (ties in
/// lexicographic order), then the supports themselves lexicographically.
fn for_each_support<F>(counts: &[usize], mut visit: F)
where
    F: FnMut(&[Vec<usize>]) -> ControlFlow<()>,
{
    fn size_vectors(counts: &[usize], remaining: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let player = acc.len();
        if player == counts.len() {
            if remaining == 0 {
                out.push(acc.clone());
            }
            return;
        }
        let later = counts.len() - player - 1;
        let later_max: usize = counts[player + 1..].iter().sum();
        for a in 1..=counts[player].min(remaining.saturating_sub(later)) {
            if remaining - a <= later_max {
                acc.push(a);
                size_vectors(counts, remaining - a, acc, out);
                acc.pop();
            }
        }
    }

    fn supports<F>(counts: &[usize], sizes: &[usize], acc: &mut Vec<Vec<usize>>, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[Vec<usize>]) -> ControlFlow<()>,
    {
        let player = acc.len();
        if player == counts.len() {
            return visit(acc);
        }
        for combo in (0..counts[player]).combinations(sizes[player]) {
            acc.push(combo);
            let flow = supports(counts, sizes, acc, visit);
            acc.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }

    let n = counts.len();
    let total: usize = counts.iter().sum();
    for t in n..=total {
        let mut vectors = Vec::new();
        size_vectors(counts, t, &mut Vec::with_capacity(n), &mut vectors);
        // balanced size vectors first, lexicographic among equals
        vectors.sort_by_key(|v| v.iter().max().unwrap_or(&0) - v.iter().min().unwrap_or(&0));
        for sizes in &vectors {
            if supports(counts, sizes, &mut Vec::with_capacity(n), &mut visit).is_break() {
                return;
            }
        }
    }
}

/// Tries the indifference system on supports in enumeration order and
/// returns the first verified equilibrium.
fn support_search(game: &Game, budget: usize) -> Option<MixedProfile> {
    let tol = accept_tol(game);
    let counts = game.strategy_counts();
    let mut tried = 0usize;
    let mut found = None;
    for_each_support(counts, |supports| {
        if tried == budget {
            return ControlFlow::Break(());
        }
        if conditionally_dominated(game, supports) {
            return ControlFlow::Continue(());
        }
        tried += 1;
        let start: Vec<Vec<f64>> = counts.iter().map(|&k| vec![1.0; k]).collect();
        match solve_on_supports(game, supports, &start) {
            Some(p) if total_regret(game, &p) <= tol => {
                found = Some(p);
                ControlFlow::Break(())
            }
            _ => ControlFlow::Continue(()),
        }
    });
    found
}

/// True if some supported strategy is strictly dominated by another
/// strategy of the same player when opponents stay on their supports;
/// such supports cannot carry an equilibrium.
fn conditionally_dominated(game: &Game, supports: &[Vec<usize>]) -> bool {
    let n = game.num_players();
    let mut profile = vec![0usize; n];
    (0..n).any(|i| {
        let others: Vec<Vec<usize>> = (0..n)
            .filter(|&j| j != i)
            .map(|j| supports[j].clone())
            .multi_cartesian_product()
            .collect();
        let others = if others.is_empty() { vec![Vec::new()] } else { others };
        let mut payoff = |own: usize, rest: &[usize]| {
            let mut it = rest.iter();
            for (j, slot) in profile.iter_mut().enumerate() {
                *slot = if j == i { own } else { *it.next().expect("one entry per opponent") };
            }
            game.payoff(&profile)[i]
        };
        supports[i].iter().any(|&s| {
            (0..game.strategy_counts()[i])
                .filter(|&d| d != s)
                .any(|d| others.iter().all(|rest| payoff(d, rest) > payoff(s, rest)))
        })
    })
}

/// Newton polish of `profile` on its own support; keeps whichever has the
/// lower regret.
fn polish(game: &Game, profile: MixedProfile) -> MixedProfile {
    let start: Vec<Vec<f64>> = profile.strategies().iter().map(|s| s.probs().to_vec()).collect();
    let mut best = (total_regret(game, &profile), profile);
    let mut tried: Vec<Vec<Vec<usize>>> = Vec::new();
    for threshold in [1e-9, 1e-6, 1e-4, 1e-2] {
        let supports: Vec<Vec<usize>> = best_supports(&start, threshold);
        if tried.contains(&supports) {
            continue;
        }
        if let Some(p) = solve_on_supports(game, &supports, &start) {
            let r = total_regret(game, &p);
            if r < best.0 {
                best = (r, p);
            }
        }
        tried.push(supports);
    }
    best.1
}

/// Strategies with probability above `threshold`, never empty.
fn best_supports(probs: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    probs
        .iter()
        .map(|p| {
            let s: Vec<usize> = (0..p.len()).filter(|&k| p[k] > threshold).collect();
            if s.is_empty() {
                vec![crate::game::argmax_lowest(p)]
            } else {
                s
            }
        })
        .collect()
}

/// Exact equilibrium of a two-player game.
///
/// Order of attempts: the first pure equilibrium in row-major order; for
/// constant-sum games the maximin linear programs; otherwise support
/// enumeration with supports in increasing total size.
pub fn nash_2p(game: &Game) -> Result<MixedProfile> {
    if game.num_players() != 2 {
        return Err(Error::InvalidConfig(format!(
            "nash_2p needs exactly 2 players, got {}",
            game.num_players()
        )));
    }
    if let Some(p) = first_pure_equilibrium(game) {
        return Ok(p);
    }
    let tol = accept_tol(game);
    if game.is_constant_sum() {
        let (m, n) = (game.strategy_counts()[0], game.strategy_counts()[1]);
        let (x, _) = maximin(m, n, |r, c| game.payoff(&[r, c])[0])?;
        let (y, _) = maximin(n, m, |c, r| game.payoff(&[r, c])[1])?;
        let candidate = polish(
            game,
            MixedProfile::new(vec![MixedStrategy::from_vec_unchecked(x), MixedStrategy::from_vec_unchecked(y)])?,
        );
        if total_regret(game, &candidate) <= tol {
            return Ok(candidate);
        }
    }
    support_search(game, usize::MAX)
        .ok_or_else(|| Error::SolverFailure("support enumeration found no equilibrium".into()))
}

/// Approximate equilibrium of an n-player game; two-player games go to
/// [`nash_2p`].
///
/// For three or more players: pure scan, then Newton on supports in
/// increasing size within the configured budget, then replicator descent
/// from several starts with a Newton polish. The lowest-regret result
/// wins, earlier restarts winning ties.
pub fn nash_np(game: &Game, cfg: &NashConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let finish = |profile: MixedProfile, steps_used: usize| {
        let regret_total = total_regret(game, &profile);
        SolverResult { profile, regret_total, steps_used, hit_threshold: false, residual: None }
    };
    if game.num_players() == 2 {
        return Ok(finish(nash_2p(game)?, 0));
    }
    if let Some(p) = first_pure_equilibrium(game) {
        return Ok(finish(p, 0));
    }
    if let Some(p) = support_search(game, cfg.support_budget) {
        return Ok(finish(p, 0));
    }

    let (lo, hi) = game
        .raw_payoffs()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    // keeps every multiplicative factor 1 + a(d - mean) positive
    let step = 0.5 / (hi - lo).max(1e-12);
    let counts = game.strategy_counts().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, MixedProfile)> = None;
    for restart in 0..cfg.restarts {
        let mut profile = if restart == 0 {
            MixedProfile::uniform(&counts)
        } else {
            dirichlet_profile(&counts, &mut rng)
        };
        let mut devs = game.all_deviation_payoffs(&profile);
        let mut local = (regret_from_deviations(&profile, &devs).total, profile.clone());
        for _ in 0..cfg.rd_steps {
            profile = update(&profile, &devs, step, 0.0);
            devs = game.all_deviation_payoffs(&profile);
            let r = regret_from_deviations(&profile, &devs).total;
            if r < local.0 {
                local = (r, profile.clone());
            }
        }
        let polished = polish(game, local.1);
        let r = total_regret(game, &polished);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, polished));
        }
    }
    let (_, profile) = best.expect("at least one restart");
    Ok(finish(profile, cfg.rd_steps * cfg.restarts))
}

pub(super) fn dirichlet_profile(counts: &[usize], rng: &mut ChaCha8Rng) -> MixedProfile {
    let strategies = counts
        .iter()
        .map(|&k| {
            let mut w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            MixedStrategy::from_vec_unchecked(w)
        })
        .collect();
    MixedProfile::new(strategies).expect("non-empty player list")
}
