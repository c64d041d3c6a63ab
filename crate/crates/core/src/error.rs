use thiserror::Error;

/// Errors raised by the game model, solvers and search procedures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a game needs at least one player")]
    NoPlayers,

    #[error("player {player} has an empty strategy set")]
    EmptyStrategySet { player: usize },

    #[error("expected {expected} payoff entries, found {found}")]
    PayoffLength { expected: usize, found: usize },

    #[error("payoff entry {index} is not finite")]
    NonFinitePayoff { index: usize },

    #[error("profile covers {found} players but the game has {expected}")]
    PlayerCount { expected: usize, found: usize },

    #[error("player {player}: expected {expected} strategies, profile has {found}")]
    StrategyCount {
        player: usize,
        expected: usize,
        found: usize,
    },

    #[error("player index {player} is out of range for a {num_players}-player game")]
    InvalidPlayer { player: usize, num_players: usize },

    #[error("player {player}: strategy {strategy} is out of range ({count} strategies)")]
    InvalidStrategy {
        player: usize,
        strategy: usize,
        count: usize,
    },

    #[error("invalid mixed strategy: {0}")]
    InvalidMixedStrategy(String),

    #[error("cannot project an empty vector onto the simplex")]
    EmptyVector,

    #[error("vector entry {index} is not finite")]
    NonFiniteVector { index: usize },

    #[error("player {player}: strategy {strategy} is already in the strategy set")]
    DuplicateStrategy { player: usize, strategy: usize },

    #[error("profile {profile:?} has not been evaluated")]
    MissingProfile { profile: Vec<usize> },

    #[error("player {player}: strategy {strategy} is not in the empirical strategy set")]
    NotInStrategySet { player: usize, strategy: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("player {player}: probability floor {floor} is infeasible for {count} strategies")]
    InfeasibleFloor {
        player: usize,
        floor: f64,
        count: usize,
    },

    #[error("equilibrium search failed: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
