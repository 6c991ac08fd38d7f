//! Continuous-index results checked numerically: the Brownian bridge as a
//! Gauss-Markov chain, the driving noise of isotropic fields on the disc,
//! and the Whittle field.

pub mod bessel;
pub mod bridge;
pub mod isotropic;
pub mod quadrature;
pub mod suite;
pub mod whittle;

pub use bridge::{bb_covariance, bb_predict, bb_ratio, bb_telescope_sample};
pub use isotropic::{
    c_lambda_isotropic, c_lambda_numeric, polar_distance, w_increment_moments, NoiseSpec,
    RadialCovariance,
};
pub use suite::{run_suite, Check, VerifyOptions, VerifyReport};
pub use whittle::{whittle_upsilon, whittle_upsilon_prime};
