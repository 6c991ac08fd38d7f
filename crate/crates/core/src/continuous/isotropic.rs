//! Driving-noise moments of a homogeneous isotropic field on the unit disc,
//! indexed by radius-from-boundary `λ` and angle `θ`.

use super::quadrature::integrate;
use super::whittle::{whittle_upsilon_prime_with_tol, whittle_upsilon_with_tol};
use crate::error::{Error, Result};
use std::sync::Arc;

/// Step for `Υ′` when no analytic derivative is supplied.
pub const UPSILON_PRIME_STEP: f64 = 1e-6;
/// Step for the one-sided `μ`-derivatives of `R_{μ,λ}` in [`c_lambda_numeric`].
pub const JUMP_STEP: f64 = 1e-5;
pub const INCREMENT_TOL: f64 = 1e-8;
const WHITTLE_TOL: f64 = 1e-12;

type Radial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Jump = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Distance between the disc points at `(1−μ)e^{iθ₁}` and `(1−λ)e^{iθ₂}`.
/// Written as `(p−q)² + 4pq sin²(Δθ/2)` to avoid cancellation near `μ = λ`.
pub fn polar_distance(mu: f64, lambda: f64, theta1: f64, theta2: f64) -> f64 {
    let (p, q) = (1.0 - mu, 1.0 - lambda);
    let half_sin = (0.5 * (theta1 - theta2)).sin();
    ((p - q) * (p - q) + 4.0 * p * q * half_sin * half_sin).max(0.0).sqrt()
}

/// Covariance as a function of Euclidean distance.
#[derive(Clone)]
pub struct RadialCovariance {
    upsilon: Radial,
    upsilon_prime: Option<Radial>,
}

impl RadialCovariance {
    /// `upsilon` must satisfy `Υ(0) > 0`.
    pub fn new(upsilon: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let upsilon: Radial = Arc::new(upsilon);
        let at_zero = upsilon(0.0);
        if !(at_zero > 0.0) {
            return Err(Error::Invalid(format!("radial covariance has Υ(0) = {at_zero}")));
        }
        Ok(Self { upsilon, upsilon_prime: None })
    }

    pub fn with_derivative(mut self, prime: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.upsilon_prime = Some(Arc::new(prime));
        self
    }

    /// `Υ(t) = e^{−rate·t}`.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::Invalid(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self::new(move |t: f64| (-rate * t).exp())?
            .with_derivative(move |t: f64| -rate * (-rate * t).exp()))
    }

    /// The Whittle field; evaluations outside `[0, 4]` or failing quadrature give NaN.
    pub fn whittle() -> Self {
        Self {
            upsilon: Arc::new(|t| whittle_upsilon_with_tol(t, WHITTLE_TOL).unwrap_or(f64::NAN)),
            upsilon_prime: Some(Arc::new(|t| {
                whittle_upsilon_prime_with_tol(t, WHITTLE_TOL).unwrap_or(f64::NAN)
            })),
        }
    }

    pub fn upsilon(&self, t: f64) -> f64 {
        (self.upsilon)(t)
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.upsilon_prime.is_some()
    }

    /// Analytic `Υ′` if supplied, else a central difference (forward at 0).
    pub fn upsilon_prime(&self, t: f64) -> f64 {
        if let Some(prime) = &self.upsilon_prime {
            return prime(t);
        }
        let h = UPSILON_PRIME_STEP;
        if t < h {
            (self.upsilon(t + h) - self.upsilon(t)) / h
        } else {
            (self.upsilon(t + h) - self.upsilon(t - h)) / (2.0 * h)
        }
    }

    /// `R_{μ,λ}(θ₁,θ₂) = Υ(D_{μ,λ}(θ₁,θ₂))`.
    pub fn polar(&self, mu: f64, lambda: f64, theta1: f64, theta2: f64) -> f64 {
        self.upsilon(polar_distance(mu, lambda, theta1, theta2))
    }
}

impl std::fmt::Debug for RadialCovariance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialCovariance")
            .field("upsilon(0)", &self.upsilon(0.0))
            .field("analytic_derivative", &self.has_analytic_derivative())
            .finish()
    }
}

/// Closed form of the derivative jump: `−2Υ′(0)` on the diagonal, 0 off it.
pub fn c_lambda_isotropic(cov: &RadialCovariance, _lambda: f64, theta1: f64, theta2: f64) -> f64 {
    if theta1 == theta2 {
        -2.0 * cov.upsilon_prime(0.0)
    } else {
        0.0
    }
}

/// Jump of `∂R_{μ,λ}/∂μ` across `μ = λ`, each side taken by a one-sided
/// second-order difference with step [`JUMP_STEP`].
pub fn c_lambda_numeric(cov: &RadialCovariance, lambda: f64, theta1: f64, theta2: f64) -> f64 {
    let h = JUMP_STEP;
    let r = |mu: f64| cov.polar(mu, lambda, theta1, theta2);
    let (r0, r_minus, r_minus2, r_plus, r_plus2) =
        (r(lambda), r(lambda - h), r(lambda - 2.0 * h), r(lambda + h), r(lambda + 2.0 * h));
    let from_below = (3.0 * r0 - 4.0 * r_minus + r_minus2) / (2.0 * h);
    let from_above = (-3.0 * r0 + 4.0 * r_plus - r_plus2) / (2.0 * h);
    from_below - from_above
}

/// Derivative jump `C_λ(θ₁,θ₂)` and the normalisation `B_λ(θ)` built from it.
#[derive(Clone)]
pub struct NoiseSpec {
    c_lambda: Jump,
    zero_branch: f64,
}

impl NoiseSpec {
    pub const DEFAULT_K: f64 = 1.0;

    pub fn new(c_lambda: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { c_lambda: Arc::new(c_lambda), zero_branch: Self::DEFAULT_K }
    }

    pub fn with_zero_branch(mut self, k: f64) -> Result<Self> {
        if k == 0.0 || !k.is_finite() {
            return Err(Error::Invalid(format!("zero-branch constant must be finite and nonzero, got {k}")));
        }
        self.zero_branch = k;
        Ok(self)
    }

    pub fn analytic(cov: RadialCovariance) -> Self {
        Self::new(move |l, t1, t2| c_lambda_isotropic(&cov, l, t1, t2))
    }

    pub fn numeric(cov: RadialCovariance) -> Self {
        Self::new(move |l, t1, t2| c_lambda_numeric(&cov, l, t1, t2))
    }

    pub fn c_lambda(&self, lambda: f64, theta1: f64, theta2: f64) -> f64 {
        (self.c_lambda)(lambda, theta1, theta2)
    }

    /// `√C_λ(θ,θ)` when positive, otherwise the zero-branch constant.
    pub fn b_lambda(&self, lambda: f64, theta: f64) -> f64 {
        let c = self.c_lambda(lambda, theta, theta);
        if c > 0.0 {
            c.sqrt()
        } else {
            self.zero_branch
        }
    }

    fn normalised(&self, u: f64, theta1: f64, theta2: f64) -> f64 {
        self.c_lambda(u, theta1, theta2) / (self.b_lambda(u, theta1) * self.b_lambda(u, theta2))
    }
}

/// Returns `(E[w_{λ₁}(θ₁) w_{λ₁}(θ₂)], E[(w_{λ₁}(θ₁) − w_{λ₂}(θ₂))²])` for
/// `λ₂ ≤ λ₁`, both by adaptive quadrature of `C_u/(B_u B_u)`.
pub fn w_increment_moments(
    spec: &NoiseSpec,
    lambda1: f64,
    lambda2: f64,
    theta1: f64,
    theta2: f64,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&lambda2) || !(0.0..=1.0).contains(&lambda1) || lambda2 > lambda1 {
        return Err(Error::Invalid(format!(
            "need 0 ≤ λ₂ ≤ λ₁ ≤ 1, got λ₁ = {lambda1}, λ₂ = {lambda2}"
        )));
    }
    let kernel = |u: f64| spec.normalised(u, theta1, theta2);
    let same_level = integrate(kernel, 0.0, lambda1, INCREMENT_TOL)?;
    let shared = integrate(kernel, 0.0, lambda2, INCREMENT_TOL)?;
    Ok((same_level, lambda1 + lambda2 - 2.0 * shared))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn distances() {
        assert_eq!(polar_distance(0.3, 0.3, 1.0, 1.0), 0.0);
        assert!((polar_distance(0.0, 1.0, 0.4, 2.0) - 1.0).abs() < 1e-15);
        assert!((polar_distance(0.0, 0.0, PI, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_jump() {
        let cov = RadialCovariance::exponential(1.0).unwrap();
        assert_eq!(c_lambda_isotropic(&cov, 0.4, 1.0, 1.0), 2.0);
        assert_eq!(c_lambda_isotropic(&cov, 0.4, 0.0, 1.0), 0.0);
        assert!((c_lambda_numeric(&cov, 0.4, 1.0, 1.0) - 2.0).abs() < 1e-6);
        assert!(c_lambda_numeric(&cov, 0.4, 0.0, PI / 2.0).abs() < 1e-4);
    }

    #[test]
    fn finite_difference_derivative_fallback() {
        let cov = RadialCovariance::new(|t: f64| (-2.0 * t).exp()).unwrap();
        assert!(!cov.has_analytic_derivative());
        assert!((cov.upsilon_prime(0.0) + 2.0).abs() < 1e-5);
        assert!((cov.upsilon_prime(0.5) + 2.0 * (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn whittle_has_no_jump() {
        let cov = RadialCovariance::whittle();
        assert_eq!(c_lambda_isotropic(&cov, 0.5, 0.2, 0.2), 0.0);
        let spec = NoiseSpec::analytic(cov);
        assert_eq!(spec.b_lambda(0.5, 0.2), NoiseSpec::DEFAULT_K);
    }

    #[test]
    fn brownian_increments() {
        let spec = NoiseSpec::analytic(RadialCovariance::exponential(1.0).unwrap());
        let (_, var) = w_increment_moments(&spec, 0.7, 0.2, 0.3, 0.3).unwrap();
        assert!((var - 0.5).abs() < 1e-7);
        let (cov, _) = w_increment_moments(&spec, 0.7, 0.2, 0.3, 1.3).unwrap();
        assert_eq!(cov, 0.0);
        let (_, var) = w_increment_moments(&spec, 0.4, 0.4, 0.3, 0.3).unwrap();
        assert!(var.abs() < 1e-12);
        assert!(w_increment_moments(&spec, 0.2, 0.7, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RadialCovariance::new(|_| 0.0).is_err());
        assert!(RadialCovariance::exponential(-1.0).is_err());
        let spec = NoiseSpec::analytic(RadialCovariance::exponential(1.0).unwrap());
        assert!(spec.with_zero_branch(0.0).is_err());
    }
}
