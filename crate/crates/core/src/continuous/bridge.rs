//! Brownian bridge on `[0, 1]` as a one-dimensional telescoping chain.

use crate::error::{Error, Result};
use crate::sampling::NormalStream;

/// `R(t, s) = min(t, s)(1 − max(t, s))`.
pub fn bb_covariance(t: f64, s: f64) -> f64 {
    t.min(s) * (1.0 - t.max(s))
}

/// Coefficient of `x(r)` in `E[x(s) | x(τ), τ ≤ r]`, i.e. `(1−s)/(1−r)`.
pub fn bb_predict(r: f64, s: f64) -> Result<f64> {
    if !(0.0 <= r && r < s && s < 1.0) {
        return Err(Error::Invalid(format!("prediction needs 0 ≤ r < s < 1, got r = {r}, s = {s}")));
    }
    Ok((1.0 - s) / (1.0 - r))
}

/// The same coefficient from the covariance, `R(s, r)/R(r, r)`; needs `r > 0`.
pub fn bb_ratio(r: f64, s: f64) -> f64 {
    bb_covariance(s, r) / bb_covariance(r, r)
}

/// `|R(s, t) − coeff·R(r, t)|` for `t ≤ r < s`: the past enters only through `x(r)`.
pub fn bb_markov_residual(t: f64, r: f64, s: f64) -> Result<f64> {
    if t > r {
        return Err(Error::Invalid(format!("need t ≤ r, got t = {t}, r = {r}")));
    }
    let coeff = bb_predict(r, s)?;
    Ok((bb_covariance(s, t) - coeff * bb_covariance(r, t)).abs())
}

/// One path on the grid `i/n_steps`, built forward from `x(0) = 0` by the
/// conditional recursion `x(s) = coeff·x(r) + √(R(s,s) − coeff² R(r,r))·ξ`.
/// The endpoint `x(1)` is 0 because its conditional variance is.
pub fn bb_telescope_sample(n_steps: usize, seed: u64) -> Result<Vec<f64>> {
    if n_steps < 2 {
        return Err(Error::Invalid(format!("bridge grid needs at least 2 steps, got {n_steps}")));
    }
    let mut normals = NormalStream::new(seed);
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(0.0);
    for i in 1..=n_steps {
        let r = (i - 1) as f64 / n_steps as f64;
        let s = i as f64 / n_steps as f64;
        let coeff = (1.0 - s) / (1.0 - r);
        let var = (bb_covariance(s, s) - coeff * coeff * bb_covariance(r, r)).max(0.0);
        let prev = path[i - 1];
        let next = if i == n_steps { 0.0 } else { coeff * prev + var.sqrt() * normals.next_normal() };
        path.push(next);
    }
    Ok(path)
}
