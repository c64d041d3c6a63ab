use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile, MixedStrategy};

use super::SolverResult;

/// Residual below which the logit iteration counts as converged.
pub const QRE_CONVERGED: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QreConfig {
    /// Rationality parameter; 0 gives uniform play.
    pub tau: f64,
    pub iters: usize,
    /// Weight on the logit image in each damped update.
    pub damping: f64,
}

impl QreConfig {
    pub const DEFAULT_DAMPING: f64 = 0.5;

    pub fn new(tau: f64) -> Self {
        QreConfig { tau, iters: 10_000, damping: Self::DEFAULT_DAMPING }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be non-negative, got {}", self.tau)));
        }
        if self.iters == 0 {
            return Err(Error::InvalidConfig("qre iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

fn softmax(values: &[f64], tau: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|&v| (tau * (v - max)).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}

fn logit_image(game: &Game, profile: &MixedProfile, tau: f64) -> Vec<Vec<f64>> {
    game.all_deviation_payoffs(profile)
        .iter()
        .map(|dev| softmax(dev, tau))
        .collect()
}

fn residual_against(profile: &MixedProfile, image: &[Vec<f64>]) -> f64 {
    profile
        .strategies()
        .iter()
        .zip(image)
        .flat_map(|(s, l)| s.probs().iter().zip(l).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Max-norm distance between `profile` and its logit response at `tau`.
pub fn logit_residual(game: &Game, profile: &MixedProfile, tau: f64) -> Result<f64> {
    game.check_profile(profile)?;
    Ok(residual_against(profile, &logit_image(game, profile, tau)))
}

/// Damped logit fixed-point iteration from uniform.
pub fn qre_logit(game: &Game, cfg: &QreConfig) -> Result<SolverResult> {
    qre_logit_with_history(game, cfg).map(|(res, _)| res)
}

/// As [`qre_logit`], also returning the residual before every update
/// and after the last one.
pub fn qre_logit_with_history(game: &Game, cfg: &QreConfig) -> Result<(SolverResult, Vec<f64>)> {
    cfg.validate()?;
    let mut profile = MixedProfile::uniform(game.strategy_counts());
    let mut history = Vec::new();
    let mut steps = 0;
    let residual = loop {
        let image = logit_image(game, &profile, cfg.tau);
        let residual = residual_against(&profile, &image);
        history.push(residual);
        if residual < QRE_CONVERGED || steps == cfg.iters {
            break residual;
        }
        let d = cfg.damping;
        let strategies = profile
            .strategies()
            .iter()
            .zip(&image)
            .map(|(s, l)| {
                let mut next: Vec<f64> = s.probs().iter().zip(l).map(|(a, b)| (1.0 - d) * a + d * b).collect();
                let total: f64 = next.iter().sum();
                next.iter_mut().for_each(|x| *x /= total);
                MixedStrategy::from_vec_unchecked(next)
            })
            .collect();
        profile = MixedProfile::new(strategies)?;
        steps += 1;
    };
    let regret_total = game.regret(&profile)?.total;
    let result = SolverResult {
        profile,
        regret_total,
        steps_used: steps,
        hit_threshold: residual < QRE_CONVERGED,
        residual: Some(residual),
    };
    Ok((result, history))
}
