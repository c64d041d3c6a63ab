//! Restricted strategy sets and simulation-estimated payoffs over them.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile, MixedStrategy, Profiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetEntry {
    pub strategy: usize,
    /// PSRO iteration that introduced the strategy (0 for initial sets).
    pub iteration: usize,
}

/// Per-player ordered subsets of full-game strategy indices.
///
/// Position `k` in a player's list is that strategy's index in the
/// restricted game, so insertion order doubles as restricted indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategySets {
    per_player: Vec<Vec<SetEntry>>,
}

impl StrategySets {
    pub fn new(initial: Vec<Vec<usize>>) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::NoPlayers);
        }
        let mut sets = StrategySets {
            per_player: vec![Vec::new(); initial.len()],
        };
        for (player, strategies) in initial.into_iter().enumerate() {
            if strategies.is_empty() {
                return Err(Error::EmptyStrategySet { player });
            }
            for s in strategies {
                if !sets.add(player, s, 0) {
                    return Err(Error::DuplicateStrategy { player, strategy: s });
                }
            }
        }
        Ok(sets)
    }

    /// One strategy per player.
    pub fn singletons(profile: &[usize]) -> Self {
        StrategySets {
            per_player: profile
                .iter()
                .map(|&s| vec![SetEntry { strategy: s, iteration: 0 }])
                .collect(),
        }
    }

    /// Every strategy of every player.
    pub fn full(counts: &[usize]) -> Self {
        StrategySets::new(counts.iter().map(|&c| (0..c).collect()).collect())
            .expect("full strategy sets are valid")
    }

    pub fn num_players(&self) -> usize {
        self.per_player.len()
    }

    pub fn len(&self, player: usize) -> usize {
        self.per_player[player].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.per_player.iter().map(Vec::len).collect()
    }

    pub fn box_size(&self) -> usize {
        self.per_player.iter().map(Vec::len).product()
    }

    pub fn entries(&self, player: usize) -> &[SetEntry] {
        &self.per_player[player]
    }

    pub fn strategies(&self, player: usize) -> Vec<usize> {
        self.per_player[player].iter().map(|e| e.strategy).collect()
    }

    pub fn strategy_at(&self, player: usize, position: usize) -> usize {
        self.per_player[player][position].strategy
    }

    pub fn position(&self, player: usize, strategy: usize) -> Option<usize> {
        self.per_player[player].iter().position(|e| e.strategy == strategy)
    }

    pub fn contains(&self, player: usize, strategy: usize) -> bool {
        self.position(player, strategy).is_some()
    }

    /// Appends `strategy` unless already present; returns whether it was added.
    pub fn add(&mut self, player: usize, strategy: usize, iteration: usize) -> bool {
        if self.contains(player, strategy) {
            return false;
        }
        self.per_player[player].push(SetEntry { strategy, iteration });
        true
    }

    /// The most recently inserted strategy of `player`.
    pub fn most_recent(&self, player: usize) -> usize {
        self.per_player[player]
            .last()
            .expect("strategy sets are non-empty")
            .strategy
    }

    /// The sets restricted to the first `counts[i]` insertions per player.
    pub fn prefix(&self, counts: &[usize]) -> StrategySets {
        StrategySets {
            per_player: self
                .per_player
                .iter()
                .zip(counts)
                .map(|(entries, &c)| entries[..c.min(entries.len())].to_vec())
                .collect(),
        }
    }

    pub fn validate_for(&self, game: &Game) -> Result<()> {
        if self.num_players() != game.num_players() {
            return Err(Error::PlayerCount {
                expected: game.num_players(),
                found: self.num_players(),
            });
        }
        for (player, entries) in self.per_player.iter().enumerate() {
            let count = game.strategy_counts()[player];
            if entries.is_empty() {
                return Err(Error::EmptyStrategySet { player });
            }
            if let Some(e) = entries.iter().find(|e| e.strategy >= count) {
                return Err(Error::InvalidStrategy {
                    player,
                    strategy: e.strategy,
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &StrategySets) -> Result<()> {
        if self.num_players() != other.num_players() {
            return Err(Error::PlayerCount {
                expected: other.num_players(),
                found: self.num_players(),
            });
        }
        for player in 0..self.num_players() {
            for e in &self.per_player[player] {
                if !other.contains(player, e.strategy) {
                    return Err(Error::NotInStrategySet {
                        player,
                        strategy: e.strategy,
                    });
                }
            }
        }
        Ok(())
    }

    /// Full-game pure profiles of the box, row-major over set positions.
    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        Profiles::new(&self.counts()).map(move |pos| self.to_full(&pos))
    }

    pub fn to_full(&self, positions: &[usize]) -> Vec<usize> {
        positions
            .iter()
            .enumerate()
            .map(|(i, &k)| self.per_player[i][k].strategy)
            .collect()
    }

    /// Embeds a profile over these sets into the full strategy space.
    pub fn lift(&self, profile: &MixedProfile, full_counts: &[usize]) -> MixedProfile {
        let strategies = (0..self.num_players())
            .map(|i| {
                let mut probs = vec![0.0; full_counts[i]];
                for (k, e) in self.per_player[i].iter().enumerate() {
                    probs[e.strategy] = profile.strategy(i)[k];
                }
                MixedStrategy::from_vec_unchecked(probs)
            })
            .collect();
        MixedProfile::new(strategies).expect("non-empty player list")
    }

    /// Re-indexes a profile over these sets onto a superset `outer`.
    pub fn embed(&self, profile: &MixedProfile, outer: &StrategySets) -> Result<MixedProfile> {
        self.is_subset_of(outer)?;
        let strategies = (0..self.num_players())
            .map(|i| {
                let mut probs = vec![0.0; outer.len(i)];
                for (k, e) in self.per_player[i].iter().enumerate() {
                    let pos = outer.position(i, e.strategy).expect("checked subset");
                    probs[pos] = profile.strategy(i)[k];
                }
                MixedStrategy::from_vec_unchecked(probs)
            })
            .collect();
        MixedProfile::new(strategies)
    }
}

/// A standalone game over the restricted box, copied from true payoffs.
pub fn restrict(full: &Game, sets: &StrategySets) -> Result<Game> {
    sets.validate_for(full)?;
    let mut payoffs = Vec::with_capacity(sets.box_size() * full.num_players());
    for profile in sets.profiles() {
        payoffs.extend_from_slice(full.payoff(&profile));
    }
    Game::new(sets.counts(), payoffs)
}

/// Noisy stand-in for simulation: sample mean of `samples_per_profile`
/// draws of the true payoff plus i.i.d. Gaussian noise per player.
///
/// Each profile draws from its own stream derived from `seed` and the
/// profile indices, so estimates do not depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffEstimator {
    pub noise_std: f64,
    pub samples_per_profile: u32,
    pub seed: u64,
}

impl PayoffEstimator {
    pub fn new(noise_std: f64, samples_per_profile: u32, seed: u64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_std must be a non-negative real, got {noise_std}"
            )));
        }
        if samples_per_profile == 0 {
            return Err(Error::InvalidConfig("samples_per_profile must be positive".into()));
        }
        Ok(PayoffEstimator {
            noise_std,
            samples_per_profile,
            seed,
        })
    }

    /// Noise-free estimator with a single sample per profile.
    pub fn exact() -> Self {
        PayoffEstimator {
            noise_std: 0.0,
            samples_per_profile: 1,
            seed: 0,
        }
    }

    pub fn estimate(&self, full: &Game, profile: &[usize]) -> Vec<f64> {
        let truth = full.payoff(profile);
        if self.noise_std == 0.0 {
            return truth.to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(profile_stream(self.seed, profile));
        let normal = Normal::new(0.0, self.noise_std).expect("validated noise_std");
        let n = self.samples_per_profile as f64;
        let mut sums = vec![0.0; truth.len()];
        for _ in 0..self.samples_per_profile {
            for s in sums.iter_mut() {
                *s += normal.sample(&mut rng);
            }
        }
        truth.iter().zip(sums).map(|(t, s)| t + s / n).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn profile_stream(seed: u64, profile: &[usize]) -> u64 {
    profile
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ s as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorEntry {
    pub payoff: Vec<f64>,
    pub samples: u32,
}

/// Estimated payoffs keyed by full-game pure profile.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialTensor {
    entries: HashMap<Vec<usize>, TensorEntry>,
}

impl PartialTensor {
    pub fn get(&self, profile: &[usize]) -> Option<&TensorEntry> {
        self.entries.get(profile)
    }

    pub fn contains(&self, profile: &[usize]) -> bool {
        self.entries.contains_key(profile)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Evaluated profiles in lexicographic order.
    pub fn sorted_profiles(&self) -> Vec<&Vec<usize>> {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        keys
    }

    /// `<i1> ... <iN> : <p1> ... <pN> : <samples>` per evaluated profile,
    /// lexicographically ordered.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for key in self.sorted_profiles() {
            let entry = &self.entries[key];
            let idx: Vec<String> = key.iter().map(|s| s.to_string()).collect();
            let pay: Vec<String> = entry.payoff.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&format!("{} : {} : {}\n", idx.join(" "), pay.join(" "), entry.samples));
        }
        out
    }
}

/// A full game seen through restricted strategy sets and a partially
/// evaluated payoff tensor.
#[derive(Debug, Clone)]
pub struct EmpiricalGame<'g> {
    full: &'g Game,
    sets: StrategySets,
    tensor: PartialTensor,
}

impl<'g> EmpiricalGame<'g> {
    pub fn new(full: &'g Game, sets: StrategySets) -> Result<Self> {
        sets.validate_for(full)?;
        Ok(EmpiricalGame {
            full,
            sets,
            tensor: PartialTensor::default(),
        })
    }

    pub fn full_game(&self) -> &'g Game {
        self.full
    }

    pub fn sets(&self) -> &StrategySets {
        &self.sets
    }

    pub fn tensor(&self) -> &PartialTensor {
        &self.tensor
    }

    pub fn evaluated_count(&self) -> usize {
        self.tensor.len()
    }

    pub fn add_strategy(&mut self, player: usize, strategy: usize, iteration: usize) -> Result<bool> {
        let count = self.full.strategy_counts()[player];
        if strategy >= count {
            return Err(Error::InvalidStrategy {
                player,
                strategy,
                count,
            });
        }
        Ok(self.sets.add(player, strategy, iteration))
    }

    /// Estimated payoff of a full-game pure profile inside the sets,
    /// simulating it only if it was never evaluated before.
    pub fn evaluate(&mut self, est: &PayoffEstimator, profile: &[usize]) -> Result<&[f64]> {
        self.full.check_pure(profile)?;
        for (player, &s) in profile.iter().enumerate() {
            if !self.sets.contains(player, s) {
                return Err(Error::NotInStrategySet { player, strategy: s });
            }
        }
        let full = self.full;
        let entry = self
            .tensor
            .entries
            .entry(profile.to_vec())
            .or_insert_with(|| TensorEntry {
                payoff: est.estimate(full, profile),
                samples: est.samples_per_profile,
            });
        Ok(&entry.payoff)
    }

    /// Evaluates every missing profile of the current sets' box.
    pub fn fill_missing(&mut self, est: &PayoffEstimator) -> usize {
        let sets = self.sets.clone();
        self.fill_box(&sets, est).expect("own sets are valid")
    }

    /// Evaluates every missing profile of `sub`'s box.
    pub fn fill_box(&mut self, sub: &StrategySets, est: &PayoffEstimator) -> Result<usize> {
        sub.is_subset_of(&self.sets)?;
        let before = self.tensor.len();
        for profile in sub.profiles() {
            self.evaluate(est, &profile)?;
        }
        Ok(self.tensor.len() - before)
    }

    pub fn is_complete(&self, sub: &StrategySets) -> Result<bool> {
        sub.is_subset_of(&self.sets)?;
        Ok(sub.profiles().all(|p| self.tensor.contains(&p)))
    }

    /// The estimated game over `sub`'s box; fails on the first missing
    /// profile in row-major order.
    pub fn to_game(&self, sub: &StrategySets) -> Result<Game> {
        sub.is_subset_of(&self.sets)?;
        let mut payoffs = Vec::with_capacity(sub.box_size() * self.full.num_players());
        for profile in sub.profiles() {
            match self.tensor.get(&profile) {
                Some(entry) => payoffs.extend_from_slice(&entry.payoff),
                None => return Err(Error::MissingProfile { profile }),
            }
        }
        Game::new(sub.counts(), payoffs)
    }

    pub fn restricted_game(&self) -> Result<Game> {
        self.to_game(&self.sets)
    }
}
