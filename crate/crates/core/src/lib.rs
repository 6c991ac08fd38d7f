//! Telescoping (boundary-inward) recursive representation of noncausal
//! lattice Gauss-Markov random fields.
//!
//! A second-order lattice field `A x = A_b x_b + v` is reordered into nested
//! rectangular shells `z_0` (the boundary), `z_1`, ..., `z_tau`, which form a
//! Gauss-Markov chain `z_k = F_k z_{k-1} + w_k`. The chain drives exact
//! sampling and Kalman / RTS estimation. The crate also carries numeric
//! checks for the continuous-index counterparts (Brownian bridge, isotropic
//! driving noise, Whittle field) and homotopy-generated telescoping surfaces.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod continuous;
pub mod denoise;
pub mod error;
pub mod estimation;
pub mod homotopy;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod sampling;
pub mod shells;
pub mod telescoping;

pub use error::{Error, Result};
pub use estimation::{direct_mmse, kalman_filter, rts_smoother, EstimationResult, ObservationModel};
pub use lattice::{
    build_precision, joint_covariance, validate_spd, LatticeSpec, NeighborhoodCoefficients, Offset,
    PrecisionSystem, SpdReport,
};
pub use sampling::{empirical_covariance, sample_field, FieldSample};
pub use shells::{permute_system, shells, BlockTridiagonal, Node, ShellDecomposition};
pub use telescoping::{factorize, factorize_oracle, TelescopingModel};
