//! Game constructors: the appendix fixtures, seeded random families and
//! file loading.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::game::{read_game, write_game, FormatError, Game};

/// The 3x3 symmetric zero-sum game whose empirical game closes under
/// minimum-regret best responses.
pub fn make_mrcp_closed_game() -> Game {
    #[rustfmt::skip]
    let payoffs = vec![
        0.0, 0.0,    -1.0, 1.0,   -0.5, 0.5,
        1.0, -1.0,    0.0, 0.0,   -5.0, 5.0,
        0.5, -0.5,    5.0, -5.0,   0.0, 0.0,
    ];
    Game::new(vec![3, 3], payoffs).expect("fixture is well formed")
}

pub fn matching_pennies() -> Game {
    Game::new(vec![2, 2], vec![1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0])
        .expect("fixture is well formed")
}

/// Symmetric `n x n` game whose double-oracle path walks the diagonal
/// `s1 -> s2 -> ... -> sn`, while a best response to the even mixture of
/// `s1, s2` jumps straight to `sn`.
pub fn make_long_path_game(n: usize) -> Result<Game> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "long-path game needs at least 4 strategies, got {n}"
        )));
    }
    let mut row = vec![vec![0.0; n]; n];
    let mut set = |a: usize, b: usize, ua: f64, ub: f64| {
        // u1(a, b) = ua and u2(a, b) = ub; store u1 only, u2 is the transpose
        row[a - 1][b - 1] = ua;
        row[b - 1][a - 1] = ub;
    };
    set(2, 1, 0.011, 0.0);
    for k in 2..n {
        let v = 0.1 * (k - 1) as f64;
        set(k, k, v, v);
        set(k + 1, k, 0.1 * k as f64, v);
    }
    let mid = n.div_ceil(2);
    if mid > 2 {
        set(mid, 1, 0.01, 0.0);
    }
    set(n, 1, 0.005, 0.0);
    set(n, 2, 0.199, 0.0);
    set(n, n, 100.0, 100.0);
    Game::from_fn(vec![n, n], |p| vec![row[p[0]][p[1]], row[p[1]][p[0]]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffDistribution {
    Uniform01,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGameSpec {
    pub num_players: usize,
    pub sizes: Vec<usize>,
    pub distribution: PayoffDistribution,
    pub zero_sum: bool,
    pub symmetric: bool,
    pub seed: u64,
}

impl RandomGameSpec {
    pub fn new(sizes: Vec<usize>, seed: u64) -> Self {
        RandomGameSpec {
            num_players: sizes.len(),
            sizes,
            distribution: PayoffDistribution::Uniform01,
            zero_sum: false,
            symmetric: false,
            seed,
        }
    }

    pub fn zero_sum(mut self) -> Self {
        self.zero_sum = true;
        self
    }

    pub fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }

    pub fn gaussian(mut self) -> Self {
        self.distribution = PayoffDistribution::Gaussian;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_players < 2 {
            return Err(Error::InvalidConfig("random games need at least 2 players".into()));
        }
        if self.sizes.len() != self.num_players {
            return Err(Error::InvalidConfig(format!(
                "{} sizes given for {} players",
                self.sizes.len(),
                self.num_players
            )));
        }
        if self.sizes.contains(&0) {
            return Err(Error::InvalidConfig("strategy counts must be positive".into()));
        }
        if self.zero_sum && self.num_players != 2 {
            return Err(Error::InvalidConfig("zero-sum games must have 2 players".into()));
        }
        if self.symmetric && self.sizes.iter().any(|&s| s != self.sizes[0]) {
            return Err(Error::InvalidConfig("symmetric games need equal strategy counts".into()));
        }
        Ok(())
    }
}

pub fn make_random_game(spec: &RandomGameSpec) -> Result<Game> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        match spec.distribution {
            PayoffDistribution::Uniform01 => rng.random::<f64>(),
            PayoffDistribution::Gaussian => rng.sample(StandardNormal),
        }
    };
    let n = spec.num_players;
    match (spec.symmetric, spec.zero_sum) {
        (false, false) => Game::from_fn(spec.sizes.clone(), |_| (0..n).map(|_| draw(&mut rng)).collect()),
        (false, true) => Game::from_fn(spec.sizes.clone(), |_| {
            let u = draw(&mut rng);
            vec![u, -u]
        }),
        (true, true) => {
            let k = spec.sizes[0];
            let mut u = vec![vec![0.0; k]; k];
            for a in 0..k {
                for b in a + 1..k {
                    let x = draw(&mut rng);
                    u[a][b] = x;
                    u[b][a] = -x;
                }
            }
            Game::from_fn(spec.sizes.clone(), |p| vec![u[p[0]][p[1]], u[p[1]][p[0]]])
        }
        (true, false) => {
            // a player's payoff depends on its own strategy and the multiset
            // of opponent strategies
            let mut table: HashMap<(usize, Vec<usize>), f64> = HashMap::new();
            Game::from_fn(spec.sizes.clone(), |p| {
                (0..n)
                    .map(|i| {
                        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| p[j]).collect();
                        others.sort_unstable();
                        *table.entry((p[i], others)).or_insert_with(|| draw(&mut rng))
                    })
                    .collect()
            })
        }
    }
}

pub fn load_game(path: impl AsRef<Path>) -> std::result::Result<Game, FormatError> {
    let file = File::open(path)?;
    read_game(BufReader::new(file))
}

pub fn save_game(game: &Game, path: impl AsRef<Path>) -> std::result::Result<(), FormatError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_game(game, &mut out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MixedProfile;

    #[test]
    fn mrcp_closed_fixture() {
        let g = make_mrcp_closed_game();
        assert_eq!(g.payoff(&[1, 2]), &[-5.0, 5.0]);
        assert!(g.profiles().all(|p| g.payoff(&p).iter().sum::<f64>() == 0.0));
        let r = g.regret(&MixedProfile::pure(&[3, 3], &[1, 1])).unwrap();
        assert_eq!(r.total, 10.0);
        assert_eq!(g.pure_equilibria(), vec![vec![2, 2]]);
    }

    #[test]
    fn long_path_entries() {
        let g = make_long_path_game(1000).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(g.payoff(&[1, 1]), &[0.1, 0.1]));
        assert!(close(g.payoff(&[999, 999]), &[100.0, 100.0]));
        assert!(close(g.payoff(&[0, 999]), &[0.0, 0.005]));
        assert!(close(g.payoff(&[0, 1]), &[0.0, 0.011]));
        assert!(close(g.payoff(&[1, 2]), &[0.1, 0.2]));
        assert!(close(g.payoff(&[2, 1]), &[0.2, 0.1]));
        assert!(close(g.payoff(&[2, 2]), &[0.2, 0.2]));
        assert!(close(g.payoff(&[499, 0]), &[0.01, 0.0]));
        assert!(close(g.payoff(&[999, 1]), &[0.199, 0.0]));
        assert!(close(g.payoff(&[1, 999]), &[0.0, 0.199]));
        assert!(close(g.payoff(&[999, 2]), &[0.0, 0.0]));
    }

    #[test]
    fn long_path_symmetry_and_unique_pure_ne() {
        for n in 4..=50 {
            let g = make_long_path_game(n).unwrap();
            for a in 0..n {
                for b in 0..n {
                    assert_eq!(g.payoff(&[a, b])[0], g.payoff(&[b, a])[1]);
                }
            }
            assert_eq!(g.pure_equilibria(), vec![vec![n - 1, n - 1]], "n = {n}");
        }
        assert!(make_long_path_game(3).is_err());
    }

    #[test]
    fn random_games_are_deterministic_and_shaped() {
        let spec = RandomGameSpec::new(vec![3, 4], 5);
        let a = make_random_game(&spec).unwrap();
        assert_eq!(a, make_random_game(&spec).unwrap());
        assert!(a.raw_payoffs().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_ne!(a, make_random_game(&RandomGameSpec::new(vec![3, 4], 6)).unwrap());

        let zs = make_random_game(&RandomGameSpec::new(vec![4, 4], 1).zero_sum()).unwrap();
        assert!(zs.profiles().all(|p| zs.payoff(&p).iter().sum::<f64>() == 0.0));

        let sym = make_random_game(&RandomGameSpec::new(vec![4, 4], 2).symmetric().gaussian()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(sym.payoff(&[a, b])[0], sym.payoff(&[b, a])[1]);
            }
        }

        let sym3 = make_random_game(&RandomGameSpec::new(vec![3, 3, 3], 2).symmetric()).unwrap();
        assert_eq!(sym3.payoff(&[0, 1, 2])[0], sym3.payoff(&[0, 2, 1])[0]);
        assert_eq!(sym3.payoff(&[0, 1, 2])[0], sym3.payoff(&[1, 0, 2])[1]);

        let szs = make_random_game(&RandomGameSpec::new(vec![3, 3], 4).symmetric().zero_sum()).unwrap();
        assert!(szs.profiles().all(|p| szs.payoff(&p).iter().sum::<f64>() == 0.0));
        assert_eq!(szs.payoff(&[0, 2])[0], szs.payoff(&[2, 0])[1]);
    }

    #[test]
    fn random_spec_validation() {
        assert!(make_random_game(&RandomGameSpec::new(vec![2, 2, 2], 0).zero_sum()).is_err());
        assert!(make_random_game(&RandomGameSpec::new(vec![2, 3], 0).symmetric()).is_err());
        assert!(make_random_game(&RandomGameSpec::new(vec![2], 0)).is_err());
    }
}
