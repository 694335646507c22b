//! Generalized solutions `u(t) = a·δ(t) + x(t)` of first-kind Volterra
//! integral equations whose kernels jump across curves `s = αᵢ(t)`.
//!
//! The pipeline is: [`model`] (problem data and hypotheses) →
//! [`characteristic`] (integer roots of `B(j)`) → [`asymptotics`]
//! (log-power expansion of the regular part) → [`stepsolver`] or
//! [`refinement`] (continuous regular part) → [`verifier`] (residuals of the
//! original and differentiated equations).

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod characteristic;
pub mod error;
pub mod json;
pub mod logpower;
pub mod model;
pub mod quadrature;
pub mod refinement;
pub mod scalar;
pub mod stepsolver;
pub mod verifier;

pub use error::{Error, Result};
