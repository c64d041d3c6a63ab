//! Minimum-regret constrained profile: the profile over the restricted
//! strategy sets with the smallest regret sum measured in the full game.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::empirical::{restrict, StrategySets};
use crate::error::{Error, Result};
use crate::game::{argmax_lowest, project_onto_scaled, Game, MixedProfile, MixedStrategy};

use super::lp::maximin;
use super::nash::{dirichlet_profile, nash_np, NashConfig};
use super::SolverResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrcpConfig {
    pub restarts: usize,
    /// Subgradient iterations per restart.
    pub iterations: usize,
    /// Initial step; iteration `t` uses `initial_step / sqrt(t)`.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for MrcpConfig {
    fn default() -> Self {
        MrcpConfig { restarts: 16, iterations: 2000, initial_step: 0.2, seed: 0 }
    }
}

/// Minimizes full-game regret over profiles supported on `sets`.
///
/// The returned profile is indexed by set position; `regret_total` is its
/// regret in `full` with deviations over every strategy. Two-player
/// constant-sum games are solved exactly by two linear programs. Other
/// games use projected subgradient descent from the lifted restricted
/// equilibrium, the uniform profile and random starts.
pub fn mrcp(full: &Game, sets: &StrategySets, cfg: &MrcpConfig) -> Result<SolverResult> {
    sets.validate_for(full)?;
    if cfg.restarts == 0 || cfg.iterations == 0 {
        return Err(Error::InvalidConfig("mrcp restarts and iterations must be at least 1".into()));
    }
    if !(cfg.initial_step > 0.0 && cfg.initial_step.is_finite()) {
        return Err(Error::InvalidConfig(format!("mrcp step must be positive, got {}", cfg.initial_step)));
    }
    let objective = Objective { full, sets };
    if full.num_players() == 2 && full.is_constant_sum() {
        let profile = constant_sum_lp(full, sets)?;
        let regret_total = objective.regret(&profile);
        return Ok(SolverResult { profile, regret_total, steps_used: 0, hit_threshold: false, residual: None });
    }

    let counts = sets.counts();
    let restricted = restrict(full, sets)?;
    let mut starts = vec![
        nash_np(&restricted, &NashConfig { seed: cfg.seed, ..NashConfig::default() })?.profile,
        MixedProfile::uniform(&counts),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.restarts.max(2) {
        starts.push(dirichlet_profile(&counts, &mut rng));
    }

    let mut best: Option<(f64, MixedProfile)> = None;
    for start in starts {
        let found = objective.descend(start, cfg);
        if best.as_ref().is_none_or(|(b, _)| found.0 < *b) {
            best = Some(found);
        }
    }
    let (regret_total, profile) = best.expect("at least two starts");
    Ok(SolverResult {
        profile,
        regret_total,
        steps_used: cfg.iterations * cfg.restarts.max(2),
        hit_threshold: false,
        residual: None,
    })
}

/// Regret sum in two-player constant-sum games separates into
/// `max_s (A y)_s - min_t (x^T A)_t`, one maximin program per player.
fn constant_sum_lp(full: &Game, sets: &StrategySets) -> Result<MixedProfile> {
    let (m, n) = (full.strategy_counts()[0], full.strategy_counts()[1]);
    let x_set = sets.strategies(0);
    let y_set = sets.strategies(1);
    let u1 = |r: usize, c: usize| full.payoff(&[r, c])[0];
    let (x, _) = maximin(x_set.len(), n, |k, c| u1(x_set[k], c))?;
    let (y, _) = maximin(y_set.len(), m, |k, r| -u1(r, y_set[k]))?;
    MixedProfile::new(vec![MixedStrategy::from_vec_unchecked(x), MixedStrategy::from_vec_unchecked(y)])
}

struct Objective<'a> {
    full: &'a Game,
    sets: &'a StrategySets,
}

impl Objective<'_> {
    fn lift_weights(&self, profile: &MixedProfile) -> Vec<Vec<f64>> {
        self.sets
            .lift(profile, self.full.strategy_counts())
            .into_strategies()
            .into_iter()
            .map(MixedStrategy::into_vec)
            .collect()
    }

    fn regret(&self, profile: &MixedProfile) -> f64 {
        let lifted = self.sets.lift(profile, self.full.strategy_counts());
        self.full.regret(&lifted).expect("lifted profile matches the game").total
    }

    /// Subgradient of the regret sum with respect to each player's
    /// restricted probabilities.
    fn subgradient(&self, profile: &MixedProfile) -> Vec<Vec<f64>> {
        let n = self.full.num_players();
        let weights = self.lift_weights(profile);
        let views: Vec<&[f64]> = weights.iter().map(Vec::as_slice).collect();
        let best: Vec<usize> = (0..n)
            .map(|i| argmax_lowest(&self.full.payoff_slice(&views, i, i)))
            .collect();
        (0..n)
            .map(|j| {
                let positions = self.sets.strategies(j);
                let mut g = vec![0.0; positions.len()];
                for i in 0..n {
                    // minus the derivative of u_i(sigma)
                    let own = self.full.payoff_slice(&views, i, j);
                    for (k, &s) in positions.iter().enumerate() {
                        g[k] -= own[s];
                    }
                    if i == j {
                        continue;
                    }
                    // plus the derivative of u_i(best_i, sigma_-i)
                    let mut pure = vec![0.0; self.full.strategy_counts()[i]];
                    pure[best[i]] = 1.0;
                    let mut dev_views = views.clone();
                    dev_views[i] = &pure;
                    let dev = self.full.payoff_slice(&dev_views, i, j);
                    for (k, &s) in positions.iter().enumerate() {
                        g[k] += dev[s];
                    }
                }
                g
            })
            .collect()
    }

    fn descend(&self, start: MixedProfile, cfg: &MrcpConfig) -> (f64, MixedProfile) {
        let mut profile = start;
        let mut best = (self.regret(&profile), profile.clone());
        for t in 1..=cfg.iterations {
            let g = self.subgradient(&profile);
            let norm = g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-15 {
                break;
            }
            let step = cfg.initial_step / (t as f64).sqrt() / norm;
            let strategies = profile
                .strategies()
                .iter()
                .zip(&g)
                .map(|(s, gi)| {
                    let mut next: Vec<f64> = s.probs().iter().zip(gi).map(|(p, d)| p - step * d).collect();
                    project_onto_scaled(&mut next, 1.0);
                    MixedStrategy::from_vec_unchecked(next)
                })
                .collect();
            profile = MixedProfile::new(strategies).expect("non-empty player list");
            let r = self.regret(&profile);
            if r < best.0 {
                best = (r, profile.clone());
            }
        }
        best
    }
}
