//! Plain-text game files.
//!
//! ```text
//! # optional comments
//! players 2
//! shape 2 2
//! 1.0000000000000000e0 -1.0000000000000000e0
//! ...
//! ```
//!
//! One payoff line per pure profile in row-major order, 17 significant
//! digits, so a write/read round trip is bit-exact.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::Game;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: cannot parse {token:?} as a number")]
    BadNumber { line: usize, token: String },

    #[error("line {line}: expected {expected} payoffs, found {found}")]
    PayoffCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("expected {expected} profiles, found {found}")]
    ProfileCount { expected: usize, found: usize },

    #[error("invalid game: {0}")]
    Game(#[from] crate::Error),
}

pub fn write_game<W: Write>(game: &Game, mut out: W) -> std::io::Result<()> {
    writeln!(out, "players {}", game.num_players())?;
    let shape: Vec<String> = game.strategy_counts().iter().map(|c| c.to_string()).collect();
    writeln!(out, "shape {}", shape.join(" "))?;
    for row in game.raw_payoffs().chunks_exact(game.num_players()) {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_game<R: BufRead>(input: R) -> Result<Game, FormatError> {
    let mut players: Option<usize> = None;
    let mut shape: Option<Vec<usize>> = None;
    let mut payoffs = Vec::new();
    let mut rows = 0usize;
    let mut last_line = 0usize;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match (players, &shape) {
            (None, _) => {
                players = Some(parse_header(&mut tokens, "players", line_no)?);
            }
            (Some(n), None) => {
                let sizes = parse_shape(&mut tokens, n, line_no)?;
                shape = Some(sizes);
            }
            (Some(n), Some(sizes)) => {
                let expected_rows: usize = sizes.iter().product();
                if rows == expected_rows {
                    return Err(FormatError::Malformed {
                        line: line_no,
                        message: format!("extra payoff line beyond {expected_rows} profiles"),
                    });
                }
                let mut found = 0;
                for token in tokens {
                    let value: f64 = token.parse().map_err(|_| FormatError::BadNumber {
                        line: line_no,
                        token: token.to_string(),
                    })?;
                    payoffs.push(value);
                    found += 1;
                }
                if found != n {
                    return Err(FormatError::PayoffCount {
                        line: line_no,
                        expected: n,
                        found,
                    });
                }
                rows += 1;
            }
        }
    }

    let sizes = match (players, shape) {
        (Some(_), Some(sizes)) => sizes,
        (None, _) => {
            return Err(FormatError::Malformed {
                line: last_line.max(1),
                message: "missing `players` header".into(),
            })
        }
        (Some(_), None) => {
            return Err(FormatError::Malformed {
                line: last_line.max(1),
                message: "missing `shape` header".into(),
            })
        }
    };
    let expected: usize = sizes.iter().product();
    if rows != expected {
        return Err(FormatError::ProfileCount {
            expected,
            found: rows,
        });
    }
    Ok(Game::new(sizes, payoffs)?)
}

fn parse_header<'a>(
    tokens: &mut impl Iterator<Item = &'a str>,
    keyword: &str,
    line: usize,
) -> Result<usize, FormatError> {
    match (tokens.next(), tokens.next(), tokens.next()) {
        (Some(k), Some(v), None) if k == keyword => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(FormatError::Malformed {
                line,
                message: format!("`{keyword}` needs a positive integer, got {v:?}"),
            }),
        },
        _ => Err(FormatError::Malformed {
            line,
            message: format!("expected `{keyword} <n>`"),
        }),
    }
}

fn parse_shape<'a>(
    tokens: &mut impl Iterator<Item = &'a str>,
    players: usize,
    line: usize,
) -> Result<Vec<usize>, FormatError> {
    if tokens.next() != Some("shape") {
        return Err(FormatError::Malformed {
            line,
            message: "expected `shape <k1> ... <kN>`".into(),
        });
    }
    let sizes = tokens
        .map(|t| match t.parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(FormatError::Malformed {
                line,
                message: format!("strategy count {t:?} is not a positive integer"),
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.len() != players {
        return Err(FormatError::Malformed {
            line,
            message: format!("shape lists {} sizes for {players} players", sizes.len()),
        });
    }
    Ok(sizes)
}
