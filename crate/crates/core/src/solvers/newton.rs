//! Newton refinement of the indifference conditions on fixed supports.
//!
//! On supports `T_i` an equilibrium makes every player indifferent among
//! its supported strategies. Unknowns are the supported probabilities;
//! equations are `u_i(t, s_-i) - u_i(t_0, s_-i) = 0` for `t` in `T_i \ {t_0}`
//! plus one normalization per player, which makes the system square.
//! The residual is multilinear, so a unit forward difference in a single
//! coordinate gives the exact Jacobian column.

use nalgebra::{DMatrix, DVector};

use crate::game::{Game, MixedProfile, MixedStrategy};

const MAX_ITERATIONS: usize = 40;

pub(crate) fn payoff_scale(game: &Game) -> f64 {
    game.raw_payoffs().iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

struct System<'a> {
    game: &'a Game,
    supports: &'a [Vec<usize>],
}

impl System<'_> {
    fn dim(&self) -> usize {
        self.supports.iter().map(Vec::len).sum()
    }

    fn weights(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut offset = 0;
        self.supports
            .iter()
            .zip(self.game.strategy_counts())
            .map(|(support, &count)| {
                let mut w = vec![0.0; count];
                for &s in support {
                    w[s] = x[offset];
                    offset += 1;
                }
                w
            })
            .collect()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let weights = self.weights(x);
        let views: Vec<&[f64]> = weights.iter().map(Vec::as_slice).collect();
        let mut out = Vec::with_capacity(self.dim());
        let mut offset = 0;
        for (i, support) in self.supports.iter().enumerate() {
            if support.len() > 1 {
                let dev = self.game.deviation_payoffs_raw(&views, i);
                let base = dev[support[0]];
                out.extend(support[1..].iter().map(|&t| dev[t] - base));
            }
            out.push(x[offset..offset + support.len()].iter().sum::<f64>() - 1.0);
            offset += support.len();
        }
        out
    }
}

/// Runs Newton's method from `start` (full-length per-player vectors) on
/// the given supports. Singular Jacobians take the least-squares step.
/// Returns a valid profile if the iteration converged to non-negative
/// probabilities; the caller still has to check outside deviations.
pub(crate) fn solve_on_supports(
    game: &Game,
    supports: &[Vec<usize>],
    start: &[Vec<f64>],
) -> Option<MixedProfile> {
    let system = System { game, supports };
    let dim = system.dim();
    let mut x: Vec<f64> = Vec::with_capacity(dim);
    for (support, s) in supports.iter().zip(start) {
        let total: f64 = support.iter().map(|&k| s[k]).sum();
        if total > 0.0 {
            x.extend(support.iter().map(|&k| s[k] / total));
        } else {
            x.extend(std::iter::repeat_n(1.0 / support.len() as f64, support.len()));
        }
    }
    let tol = 1e-12 * payoff_scale(game);
    let mut f = system.residual(&x);
    let mut converged = max_abs(&f) <= tol;
    for _ in 0..MAX_ITERATIONS {
        if converged {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for col in 0..dim {
            let mut xp = x.clone();
            xp[col] += 1.0;
            let fp = system.residual(&xp);
            for row in 0..dim {
                jac[(row, col)] = fp[row] - f[row];
            }
        }
        let rhs = DVector::from_iterator(dim, f.iter().map(|v| -v));
        let step = match jac.clone().lu().solve(&rhs) {
            Some(step) if step.iter().all(|v| v.is_finite()) => step,
            _ => jac.svd(true, true).solve(&rhs, 1e-12).ok()?,
        };
        for (xi, d) in x.iter_mut().zip(step.iter()) {
            *xi += d;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return None;
        }
        f = system.residual(&x);
        converged = max_abs(&f) <= tol;
    }
    if !converged || x.iter().any(|&v| v < -1e-9) {
        return None;
    }
    let weights = system.weights(&x);
    let strategies = weights
        .into_iter()
        .map(|mut w| {
            w.iter_mut().for_each(|p| *p = p.max(0.0));
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|p| *p /= total);
            MixedStrategy::from_vec_unchecked(w)
        })
        .collect();
    MixedProfile::new(strategies).ok()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
