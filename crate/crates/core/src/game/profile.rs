use crate::error::{Error, Result};

/// Allowed deviation of a mixed strategy's total mass from 1.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability vector over one player's strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    /// Validates `probs`; vectors outside the normalization tolerance are
    /// rejected rather than renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidMixedStrategy("no strategies".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidMixedStrategy(format!(
                "entry {i} is {}",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidMixedStrategy(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(MixedStrategy(probs))
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        MixedStrategy(probs)
    }

    pub fn uniform(count: usize) -> Self {
        assert!(count > 0, "uniform strategy over an empty set");
        MixedStrategy(vec![1.0 / count as f64; count])
    }

    pub fn pure(count: usize, strategy: usize) -> Self {
        assert!(strategy < count, "pure strategy index out of range");
        let mut probs = vec![0.0; count];
        probs[strategy] = 1.0;
        MixedStrategy(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices carrying probability strictly above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// The index of the single strategy with probability 1, if pure.
    pub fn as_pure(&self) -> Option<usize> {
        let support = self.support(0.0);
        match support.as_slice() {
            [only] if (self.0[*only] - 1.0).abs() <= NORMALIZATION_TOL => Some(*only),
            _ => None,
        }
    }
}

impl std::ops::Index<usize> for MixedStrategy {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile {
    strategies: Vec<MixedStrategy>,
}

impl MixedProfile {
    pub fn new(strategies: Vec<MixedStrategy>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::NoPlayers);
        }
        Ok(MixedProfile { strategies })
    }

    /// Builds a profile from raw probability vectors, validating each.
    pub fn from_vecs(probs: Vec<Vec<f64>>) -> Result<Self> {
        let strategies = probs
            .into_iter()
            .map(MixedStrategy::new)
            .collect::<Result<Vec<_>>>()?;
        MixedProfile::new(strategies)
    }

    pub fn uniform(counts: &[usize]) -> Self {
        MixedProfile {
            strategies: counts.iter().map(|&c| MixedStrategy::uniform(c)).collect(),
        }
    }

    pub fn pure(counts: &[usize], profile: &[usize]) -> Self {
        assert_eq!(counts.len(), profile.len());
        MixedProfile {
            strategies: counts
                .iter()
                .zip(profile)
                .map(|(&c, &s)| MixedStrategy::pure(c, s))
                .collect(),
        }
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategy(&self, player: usize) -> &MixedStrategy {
        &self.strategies[player]
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.strategies
    }

    pub fn into_strategies(self) -> Vec<MixedStrategy> {
        self.strategies
    }

    pub fn counts(&self) -> Vec<usize> {
        self.strategies.iter().map(MixedStrategy::len).collect()
    }

    /// The pure profile this mixed profile concentrates on, if any.
    pub fn as_pure(&self) -> Option<Vec<usize>> {
        self.strategies.iter().map(MixedStrategy::as_pure).collect()
    }

    pub(crate) fn weights(&self) -> Vec<&[f64]> {
        self.strategies.iter().map(MixedStrategy::probs).collect()
    }

    /// Largest absolute per-coordinate difference to `other`.
    pub fn max_abs_diff(&self, other: &MixedProfile) -> f64 {
        self.strategies
            .iter()
            .zip(&other.strategies)
            .flat_map(|(a, b)| a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Per-player regret and its sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub per_player: Vec<f64>,
    pub total: f64,
}

impl RegretReport {
    pub(crate) fn from_per_player(per_player: Vec<f64>) -> Self {
        let per_player: Vec<f64> = per_player
            .into_iter()
            .map(|r| if r < 1e-12 { 0.0 } else { r })
            .collect();
        let total = per_player.iter().sum();
        RegretReport { per_player, total }
    }

    pub fn max(&self) -> f64 {
        self.per_player.iter().copied().fold(0.0, f64::max)
    }
}
