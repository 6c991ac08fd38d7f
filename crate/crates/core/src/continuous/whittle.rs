//! Radial covariance of the Whittle field, `(Δ − 1)² R = δ`:
//! `Υ(t) = ∫₀^∞ b/(1+b²)² J0(bt) db` and
//! `Υ′(t) = −∫₀^∞ b²/(1+b²)² J1(bt) db`.
//!
//! The integral is truncated at a cutoff `B` and the remainder handled by one
//! integration by parts. Both use `√x |Jν(x)| ≤ 1.1·√(2/π)` for all `x > 0`.

use super::bessel::{j0, j1};
use super::quadrature::integrate;
use crate::error::{Error, Result};
use std::f64::consts::PI;

pub const DEFAULT_TOL: f64 = 1e-10;
const DOMAIN_MAX: f64 = 4.0;
const ENVELOPE: f64 = 1.1;

fn upsilon_weight(b: f64) -> f64 {
    let d = 1.0 + b * b;
    b / (d * d)
}

fn prime_weight(b: f64) -> f64 {
    let d = 1.0 + b * b;
    b * b / (d * d)
}

fn check_arg(t: f64, tol: f64) -> Result<()> {
    if !(0.0..=DOMAIN_MAX).contains(&t) {
        return Err(Error::Invalid(format!("Whittle covariance argument {t} outside [0, 4]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("quadrature tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// `∫₀^cut f`, split at 1, 2, 4, ... and into half-periods `π/t` of the
/// Bessel factor so that no panel hides the peak or many oscillations.
fn panelled(f: impl Fn(f64) -> f64, t: f64, cut: f64, tol: f64) -> Result<f64> {
    let mut breaks = vec![0.0];
    let mut edge = 1.0;
    while edge < cut {
        breaks.push(edge);
        edge *= 2.0;
    }
    breaks.push(cut);
    let period = if t > 0.0 { PI / t } else { f64::INFINITY };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let pieces = ((hi - lo) / period).ceil().max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        for p in 0..pieces {
            let a = lo + p as f64 * step;
            let b = if p + 1 == pieces { hi } else { a + step };
            total += integrate(&f, a, b, tol * (b - a) / cut)?;
        }
    }
    Ok(total)
}

pub fn whittle_upsilon(t: f64) -> Result<f64> {
    whittle_upsilon_with_tol(t, DEFAULT_TOL)
}

pub fn whittle_upsilon_with_tol(t: f64, tol: f64) -> Result<f64> {
    check_arg(t, tol)?;
    let body_tol = 0.5 * tol;
    if t == 0.0 {
        // ∫_B^∞ b/(1+b²)² db = 1/(2(1+B²)) exactly.
        let cut = 50.0;
        return Ok(panelled(upsilon_weight, 0.0, cut, body_tol)? + 0.5 / (1.0 + cut * cut));
    }
    // Plain tail: |J0| ≤ 1 and b/(1+b²)² ≤ b⁻³.
    let plain_cut = (2.0 / (0.25 * tol)).sqrt();
    // After parts the remainder is (1/t)∫ b |J1(bt)| |d/db (1+b²)⁻²| db
    // ≤ (4.4/t) √(2/(πt)) B^{-3.5} / 3.5.
    let scale = 4.0 * ENVELOPE / t * (2.0 / (PI * t)).sqrt() / 3.5;
    let parts_cut = (scale / (0.25 * tol)).powf(1.0 / 3.5).max(1.0);
    let integrand = |b: f64| upsilon_weight(b) * j0(b * t);
    if plain_cut <= parts_cut {
        return panelled(integrand, t, plain_cut, body_tol);
    }
    let boundary = -upsilon_weight(parts_cut) * j1(parts_cut * t) / t;
    Ok(panelled(integrand, t, parts_cut, body_tol)? + boundary)
}

pub fn whittle_upsilon_prime(t: f64) -> Result<f64> {
    whittle_upsilon_prime_with_tol(t, DEFAULT_TOL)
}

pub fn whittle_upsilon_prime_with_tol(t: f64, tol: f64) -> Result<f64> {
    check_arg(t, tol)?;
    let body_tol = 0.5 * tol;
    let integrand = |b: f64| prime_weight(b) * j1(b * t);
    if t == 0.0 {
        // J1(0) = 0: the integrand vanishes identically and so does the tail.
        return Ok(-panelled(integrand, 0.0, 50.0, body_tol)?);
    }
    // After parts the remainder is (1/t)∫ |d/db b²/(1+b²)²| |J0(bt)| db
    // ≤ (2.2/t) √(2/(πt)) B^{-2.5} / 2.5.
    let scale = 2.0 * ENVELOPE / t * (2.0 / (PI * t)).sqrt() / 2.5;
    let cut = (scale / (0.25 * tol)).powf(1.0 / 2.5).max(1.0);
    let boundary = prime_weight(cut) * j0(cut * t) / t;
    Ok(-(panelled(integrand, t, cut, body_tol)? + boundary))
}
