use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// Maximin mixture for the row chooser of a matrix with entry function
/// `a(r, c)`: maximizes `min_c sum_r x_r a(r, c)` over the simplex.
/// Returns the mixture and the guaranteed value.
pub(crate) fn maximin<F>(rows: usize, cols: usize, a: F) -> Result<(Vec<f64>, f64)>
where
    F: Fn(usize, usize) -> f64,
{
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let x: Vec<_> = (0..rows).map(|_| problem.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let value = problem.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for c in 0..cols {
        let mut terms: Vec<_> = x.iter().enumerate().map(|(r, &v)| (v, a(r, c))).collect();
        terms.push((value, -1.0));
        problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let ones: Vec<_> = x.iter().map(|&v| (v, 1.0)).collect();
    problem.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);

    let solution = problem
        .solve()
        .map_err(|e| Error::SolverFailure(format!("linear program: {e}")))?
        .into_solution()
        .map_err(|_| Error::SolverFailure("linear program interrupted".into()))?;
    let mut mix: Vec<f64> = x.iter().map(|&v| solution.var_value(v).max(0.0)).collect();
    let total: f64 = mix.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SolverFailure("linear program returned an empty mixture".into()));
    }
    mix.iter_mut().for_each(|p| *p /= total);
    Ok((mix, solution.var_value(value)))
}
