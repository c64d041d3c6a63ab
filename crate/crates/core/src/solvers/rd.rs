use crate::error::{Error, Result};
use crate::game::{
    dot, project_truncated, regret_from_deviations, Game, MixedProfile, MixedStrategy,
};

use super::{RdConfig, SolverResult};

/// One simultaneous replicator step for every player followed by
/// projection back onto the simplex.
pub fn rd_step(game: &Game, profile: &MixedProfile, step_size: f64) -> Result<MixedProfile> {
    game.check_profile(profile)?;
    let devs = game.all_deviation_payoffs(profile);
    Ok(update(profile, &devs, step_size, 0.0))
}

/// Replicator update from precomputed deviation payoffs; `floor > 0`
/// projects onto the truncated simplex instead.
pub(crate) fn update(profile: &MixedProfile, devs: &[Vec<f64>], step_size: f64, floor: f64) -> MixedProfile {
    let strategies = profile
        .strategies()
        .iter()
        .zip(devs)
        .map(|(s, dev)| {
            let p = s.probs();
            let mean = dot(p, dev);
            let mut next: Vec<f64> = p
                .iter()
                .zip(dev)
                .map(|(&x, &d)| x + step_size * x * (d - mean))
                .collect();
            project_truncated(&mut next, floor);
            MixedStrategy::from_vec_unchecked(next)
        })
        .collect();
    MixedProfile::new(strategies).expect("non-empty player list")
}

/// Regularized replicator dynamics: iterate from uniform until the
/// profile's regret is at most the threshold; after `max_steps` return the
/// lowest-regret iterate seen.
pub fn rrd(game: &Game, cfg: &RdConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let mut profile = MixedProfile::uniform(game.strategy_counts());
    let mut devs = game.all_deviation_payoffs(&profile);
    let mut regret = regret_from_deviations(&profile, &devs).total;
    let mut best = (regret, profile.clone());
    let mut steps = 0;
    while regret > cfg.regret_threshold {
        if steps == cfg.max_steps {
            return Ok(SolverResult {
                profile: best.1,
                regret_total: best.0,
                steps_used: steps,
                hit_threshold: false,
                residual: None,
            });
        }
        profile = update(&profile, &devs, cfg.step_size, 0.0);
        steps += 1;
        devs = game.all_deviation_payoffs(&profile);
        regret = regret_from_deviations(&profile, &devs).total;
        if regret < best.0 {
            best = (regret, profile.clone());
        }
    }
    Ok(SolverResult {
        profile,
        regret_total: regret,
        steps_used: steps,
        hit_threshold: true,
        residual: None,
    })
}

/// Projected replicator dynamics: `max_steps` replicator steps, each
/// projected onto `{x >= floor, sum(x) = 1}`; returns the final iterate.
pub fn prd(game: &Game, cfg: &RdConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let floor = cfg.prd_lower_bound;
    for (player, &count) in game.strategy_counts().iter().enumerate() {
        if floor * count as f64 > 1.0 + 1e-12 {
            return Err(Error::InfeasibleFloor { player, floor, count });
        }
    }
    let mut profile = MixedProfile::uniform(game.strategy_counts());
    for _ in 0..cfg.max_steps {
        let devs = game.all_deviation_payoffs(&profile);
        profile = update(&profile, &devs, cfg.step_size, floor);
    }
    let regret_total = game.regret(&profile)?.total;
    Ok(SolverResult {
        profile,
        regret_total,
        steps_used: cfg.max_steps,
        hit_threshold: false,
        residual: None,
    })
}

/// A fixed number of plain replicator steps from uniform.
pub fn fixed_rd(game: &Game, steps: usize, step_size: f64) -> Result<SolverResult> {
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::InvalidConfig(format!("step_size must be positive, got {step_size}")));
    }
    let mut profile = MixedProfile::uniform(game.strategy_counts());
    for _ in 0..steps {
        let devs = game.all_deviation_payoffs(&profile);
        profile = update(&profile, &devs, step_size, 0.0);
    }
    let regret_total = game.regret(&profile)?.total;
    Ok(SolverResult {
        profile,
        regret_total,
        steps_used: steps,
        hit_threshold: false,
        residual: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::matching_pennies;

    /// Row strategy 0 dominates for player 0, column strategy 1 dominates
    /// for player 1.
    fn dominant() -> Game {
        Game::new(vec![2, 2], vec![2.0, 0.0, 3.0, 1.0, 1.0, 0.0, 2.0, 1.0]).unwrap()
    }

    fn config(threshold: f64, steps: usize) -> RdConfig {
        RdConfig {
            max_steps: steps,
            ..RdConfig::with_threshold(threshold)
        }
    }

    #[test]
    fn zero_probability_stays_zero() {
        let g = dominant();
        let p = MixedProfile::from_vecs(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let next = rd_step(&g, &p, 0.1).unwrap();
        assert_eq!(next.strategy(0).probs(), &[0.0, 1.0]);
    }

    #[test]
    fn rest_point_is_unchanged() {
        let g = matching_pennies();
        let p = MixedProfile::uniform(&[2, 2]);
        assert_eq!(rd_step(&g, &p, 0.1).unwrap(), p);
    }

    #[test]
    fn single_step_matches_hand_calculation() {
        let g = matching_pennies();
        let p = MixedProfile::from_vecs(vec![vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
        // player 0 faces (0.5, 0.5): both rows earn 0, no movement.
        // player 1 faces (0.6, 0.4): column payoffs (-0.2, 0.2), mean 0;
        // x_k += 0.1 * x_k * (d_k - 0) -> (0.5 - 0.01, 0.5 + 0.01).
        let next = rd_step(&g, &p, 0.1).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(next.strategy(0).probs(), &[0.6, 0.4]));
        assert!(close(next.strategy(1).probs(), &[0.49, 0.51]));
    }

    #[test]
    fn rrd_guard_returns_uniform() {
        let g = dominant();
        let uniform_regret = g.regret(&MixedProfile::uniform(&[2, 2])).unwrap().total;
        let res = rrd(&g, &config(uniform_regret, 10)).unwrap();
        assert_eq!(res.steps_used, 0);
        assert!(res.hit_threshold);
        assert_eq!(res.profile, MixedProfile::uniform(&[2, 2]));
    }

    #[test]
    fn rrd_reaches_dominant_profile() {
        let g = dominant();
        let res = rrd(&g, &config(1e-6, 100_000)).unwrap();
        assert!(res.hit_threshold);
        assert!(res.regret_total <= 1e-6);
        assert!(res.profile.strategy(0)[0] > 0.999);
        assert!(res.profile.strategy(1)[1] > 0.999);
    }

    #[test]
    fn rrd_fallback_returns_trajectory_minimum() {
        let g = matching_pennies();
        let cfg = config(0.0, 1000);
        let res = rrd(&g, &cfg).unwrap();
        // uniform is already the exact equilibrium of matching pennies
        assert!(res.hit_threshold);
        assert_eq!(res.steps_used, 0);

        let skewed = Game::new(vec![2, 2], vec![2.0, -2.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0]).unwrap();
        let res = rrd(&skewed, &cfg).unwrap();
        assert!(!res.hit_threshold);
        assert_eq!(res.steps_used, 1000);
        let mut p = MixedProfile::uniform(&[2, 2]);
        let mut min = skewed.regret(&p).unwrap().total;
        for _ in 0..1000 {
            p = rd_step(&skewed, &p, cfg.step_size).unwrap();
            min = min.min(skewed.regret(&p).unwrap().total);
        }
        assert_eq!(res.regret_total, min);
        assert_eq!(skewed.regret(&res.profile).unwrap().total, res.regret_total);
    }

    #[test]
    fn prd_uniform_floor_forces_uniform() {
        let g = dominant();
        let cfg = RdConfig {
            prd_lower_bound: 0.5,
            ..config(0.0, 50)
        };
        let res = prd(&g, &cfg).unwrap();
        for s in res.profile.strategies() {
            assert!(s.probs().iter().all(|&x| (x - 0.5).abs() < 1e-15));
        }
        let bad = RdConfig {
            prd_lower_bound: 0.6,
            ..cfg
        };
        assert!(matches!(prd(&g, &bad), Err(Error::InfeasibleFloor { .. })));
    }

    #[test]
    fn prd_without_floor_is_plain_rd() {
        let g = Game::new(vec![2, 3], (0..12).map(|k| ((k * 7) % 5) as f64 / 4.0).collect()).unwrap();
        let cfg = RdConfig {
            prd_lower_bound: 0.0,
            step_size: 0.05,
            ..config(0.0, 200)
        };
        let res = prd(&g, &cfg).unwrap();
        let mut p = MixedProfile::uniform(&[2, 3]);
        for _ in 0..200 {
            p = rd_step(&g, &p, 0.05).unwrap();
        }
        assert_eq!(res.profile, p);
    }

    #[test]
    fn prd_dominant_game_hits_floor() {
        let g = dominant();
        let res = prd(&g, &RdConfig::prd_defaults()).unwrap();
        let floor = RdConfig::DEFAULT_PRD_FLOOR;
        assert!((res.profile.strategy(0)[1] - floor).abs() < 1e-15);
        assert!((res.profile.strategy(0)[0] - (1.0 - floor)).abs() < 1e-12);
        assert!((res.profile.strategy(1)[0] - floor).abs() < 1e-15);
    }

    #[test]
    fn fixed_rd_counts_steps() {
        let g = dominant();
        let res = fixed_rd(&g, 25, 0.01).unwrap();
        assert_eq!(res.steps_used, 25);
        assert!(fixed_rd(&g, 1, 0.0).is_err());
    }
}
