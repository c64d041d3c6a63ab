use crate::error::{Error, Result};
use crate::game::MixedStrategy;

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Result<MixedStrategy> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteVector { index });
    }
    let mut out = v.to_vec();
    project_onto_scaled(&mut out, 1.0);
    Ok(MixedStrategy::from_vec_unchecked(out))
}

/// Projects `v` in place onto `{x >= 0, sum(x) = mass}` by sorting and
/// thresholding. `mass <= 0` collapses to the origin.
pub(crate) fn project_onto_scaled(v: &mut [f64], mass: f64) {
    if mass <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - mass) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Projection onto the truncated simplex `{x >= floor, sum(x) = 1}`.
pub(crate) fn project_truncated(v: &mut [f64], floor: f64) {
    if floor <= 0.0 {
        project_onto_scaled(v, 1.0);
        return;
    }
    let mass = 1.0 - floor * v.len() as f64;
    v.iter_mut().for_each(|x| *x -= floor);
    project_onto_scaled(v, mass);
    v.iter_mut().for_each(|x| *x += floor);
}
