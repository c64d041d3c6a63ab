//! Dense normal-form games and the exact primitives evaluated on them:
//! expected payoffs, deviation payoffs, regret, best response and social
//! welfare.
//!
//! Payoffs are stored row-major with the last player's index varying
//! fastest; each pure profile owns a contiguous payoff vector of length
//! `num_players`.

mod format;
mod profile;
mod simplex;

pub use format::{read_game, write_game, FormatError};
pub use profile::{MixedProfile, MixedStrategy, RegretReport, NORMALIZATION_TOL};
pub use simplex::project_to_simplex;
pub(crate) use simplex::{project_onto_scaled, project_truncated};

use crate::error::{Error, Result};

/// Relative tolerance under which two deviation payoffs count as tied; ties
/// go to the lowest strategy index.
pub const BEST_RESPONSE_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    counts: Vec<usize>,
    strides: Vec<usize>,
    payoffs: Vec<f64>,
}

impl Game {
    /// Builds a game from per-player strategy counts and the flat payoff
    /// tensor (`num_profiles * num_players` entries, row-major).
    pub fn new(counts: Vec<usize>, payoffs: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::NoPlayers);
        }
        if let Some(player) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyStrategySet { player });
        }
        let expected = counts.iter().product::<usize>() * counts.len();
        if payoffs.len() != expected {
            return Err(Error::PayoffLength {
                expected,
                found: payoffs.len(),
            });
        }
        if let Some(index) = payoffs.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinitePayoff { index });
        }
        let mut strides = vec![1; counts.len()];
        for i in (0..counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        Ok(Game {
            counts,
            strides,
            payoffs,
        })
    }

    /// Builds a game by evaluating `f` on every pure profile in row-major
    /// order.
    pub fn from_fn<F>(counts: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let n = counts.len();
        let mut payoffs = Vec::with_capacity(counts.iter().product::<usize>() * n);
        for profile in Profiles::new(&counts) {
            let v = f(&profile);
            if v.len() != n {
                return Err(Error::PlayerCount {
                    expected: n,
                    found: v.len(),
                });
            }
            payoffs.extend(v);
        }
        Game::new(counts, payoffs)
    }

    pub fn num_players(&self) -> usize {
        self.counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs.len() / self.counts.len()
    }

    pub fn raw_payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn flat_index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(s, st)| s * st).sum()
    }

    /// Payoff vector of a pure profile. Panics on out-of-range indices.
    pub fn payoff(&self, profile: &[usize]) -> &[f64] {
        debug_assert!(self.check_pure(profile).is_ok());
        let n = self.counts.len();
        let base = self.flat_index(profile) * n;
        &self.payoffs[base..base + n]
    }

    pub fn profiles(&self) -> Profiles {
        Profiles::new(&self.counts)
    }

    pub fn check_pure(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.counts.len() {
            return Err(Error::PlayerCount {
                expected: self.counts.len(),
                found: profile.len(),
            });
        }
        for (player, (&s, &count)) in profile.iter().zip(&self.counts).enumerate() {
            if s >= count {
                return Err(Error::InvalidStrategy {
                    player,
                    strategy: s,
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn check_profile(&self, profile: &MixedProfile) -> Result<()> {
        if profile.num_players() != self.counts.len() {
            return Err(Error::PlayerCount {
                expected: self.counts.len(),
                found: profile.num_players(),
            });
        }
        for (player, (s, &count)) in profile.strategies().iter().zip(&self.counts).enumerate() {
            if s.len() != count {
                return Err(Error::StrategyCount {
                    player,
                    expected: count,
                    found: s.len(),
                });
            }
        }
        Ok(())
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.counts.len() {
            return Err(Error::InvalidPlayer {
                player,
                num_players: self.counts.len(),
            });
        }
        Ok(())
    }

    /// Expected payoff of `payoff_player` for each pure strategy of `free`,
    /// with every other player mixing according to `weights`. Weights need
    /// not be normalized; zero-weight strategies are skipped.
    pub(crate) fn payoff_slice(&self, weights: &[&[f64]], payoff_player: usize, free: usize) -> Vec<f64> {
        let n = self.counts.len();
        let supports: Vec<Vec<usize>> = (0..n)
            .map(|j| {
                if j == free {
                    Vec::new()
                } else {
                    (0..self.counts[j]).filter(|&s| weights[j][s] != 0.0).collect()
                }
            })
            .collect();
        let mut out = vec![0.0; self.counts[free]];
        if supports.iter().enumerate().any(|(j, s)| j != free && s.is_empty()) {
            return out;
        }
        let others: Vec<usize> = (0..n).filter(|&j| j != free).collect();
        let mut cursor = vec![0usize; others.len()];
        let free_stride = self.strides[free];
        loop {
            let mut w = 1.0;
            let mut offset = 0;
            for (slot, &j) in others.iter().enumerate() {
                let s = supports[j][cursor[slot]];
                w *= weights[j][s];
                offset += s * self.strides[j];
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += w * self.payoffs[(offset + k * free_stride) * n + payoff_player];
            }
            // odometer over the other players' supports, last player fastest
            let mut slot = others.len();
            loop {
                if slot == 0 {
                    return out;
                }
                slot -= 1;
                cursor[slot] += 1;
                if cursor[slot] < supports[others[slot]].len() {
                    break;
                }
                cursor[slot] = 0;
            }
        }
    }

    pub(crate) fn deviation_payoffs_raw(&self, weights: &[&[f64]], player: usize) -> Vec<f64> {
        self.payoff_slice(weights, player, player)
    }

    pub(crate) fn all_deviation_payoffs(&self, profile: &MixedProfile) -> Vec<Vec<f64>> {
        let weights = profile.weights();
        (0..self.num_players())
            .map(|i| self.deviation_payoffs_raw(&weights, i))
            .collect()
    }

    /// Payoff vector of the mixed profile.
    pub fn expected_payoff(&self, profile: &MixedProfile) -> Result<Vec<f64>> {
        self.check_profile(profile)?;
        let weights = profile.weights();
        Ok((0..self.num_players())
            .map(|i| dot(weights[i], &self.deviation_payoffs_raw(&weights, i)))
            .collect())
    }

    /// Expected payoff to `player` of each of its pure strategies against
    /// the other players' mixtures in `profile`.
    pub fn deviation_payoffs(&self, profile: &MixedProfile, player: usize) -> Result<Vec<f64>> {
        self.check_player(player)?;
        self.check_profile(profile)?;
        Ok(self.deviation_payoffs_raw(&profile.weights(), player))
    }

    pub fn regret(&self, profile: &MixedProfile) -> Result<RegretReport> {
        self.check_profile(profile)?;
        let devs = self.all_deviation_payoffs(profile);
        Ok(regret_from_deviations(profile, &devs))
    }

    pub fn best_response(&self, profile: &MixedProfile, player: usize) -> Result<usize> {
        let devs = self.deviation_payoffs(profile, player)?;
        Ok(argmax_lowest(&devs))
    }

    /// Pure profile with the largest payoff sum; the first in row-major
    /// order wins ties.
    pub fn max_social_welfare(&self) -> (Vec<usize>, f64) {
        let n = self.num_players();
        let (best, welfare) = self
            .payoffs
            .chunks_exact(n)
            .enumerate()
            .map(|(k, v)| (k, v.iter().sum::<f64>()))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        (self.unflatten(best), welfare)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut profile = vec![0; self.counts.len()];
        for (i, &stride) in self.strides.iter().enumerate() {
            profile[i] = flat / stride;
            flat %= stride;
        }
        profile
    }

    /// True when every profile's payoffs sum to the same constant
    /// (within a tolerance scaled to the payoff magnitude).
    pub fn is_constant_sum(&self) -> bool {
        let n = self.num_players();
        let scale = self.payoffs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut sums = self.payoffs.chunks_exact(n).map(|v| v.iter().sum::<f64>());
        let first = sums.next().unwrap_or(0.0);
        sums.all(|s| (s - first).abs() <= 1e-12 * scale)
    }

    /// Scans for pure Nash equilibria in row-major order.
    pub fn pure_equilibria(&self) -> Vec<Vec<usize>> {
        self.profiles().filter(|p| self.is_pure_equilibrium(p, 0.0)).collect()
    }

    pub fn is_pure_equilibrium(&self, profile: &[usize], tol: f64) -> bool {
        let n = self.num_players();
        let base = self.flat_index(profile);
        (0..n).all(|i| {
            let own = self.payoffs[base * n + i];
            let start = base - profile[i] * self.strides[i];
            (0..self.counts[i]).all(|k| self.payoffs[(start + k * self.strides[i]) * n + i] <= own + tol)
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = BEST_RESPONSE_TIE_TOL * max.abs().max(1.0);
    values
        .iter()
        .position(|&v| v >= max - tol)
        .expect("argmax of an empty slice")
}

pub(crate) fn regret_from_deviations(profile: &MixedProfile, devs: &[Vec<f64>]) -> RegretReport {
    let per_player = devs
        .iter()
        .enumerate()
        .map(|(i, dev)| {
            let best = dev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (best - dot(profile.strategy(i).probs(), dev)).max(0.0)
        })
        .collect();
    RegretReport::from_per_player(per_player)
}

/// Row-major iterator over the pure profiles of a strategy box.
#[derive(Debug, Clone)]
pub struct Profiles {
    counts: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Profiles {
    pub fn new(counts: &[usize]) -> Self {
        let next = if counts.is_empty() || counts.contains(&0) {
            None
        } else {
            Some(vec![0; counts.len()])
        };
        Profiles {
            counts: counts.to_vec(),
            next,
        }
    }
}

impl Iterator for Profiles {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        while i > 0 {
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.counts[i] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}
