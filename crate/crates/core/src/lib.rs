//! Strategic tabular prediction with attention-based in-context learners.
//!
//! The crate bundles:
//! - agent best-response solvers for several manipulation regimes,
//! - a linear self-attention surrogate whose forward pass performs
//!   preconditioned gradient descent on its context,
//! - strategic-context construction and the SPN two-stage predictor,
//! - executable checks of the discrete meta-prior mismatch bounds,
//! - seeded experiment runners producing long-format CSV tables.
//!
//! Core math is generic over the scalar type ([`scalar::Scalar`], i.e. `f32`
//! or `f64`); concrete `f64` aliases live at the crate root.

pub mod data;
pub mod error;
pub mod harness;
pub mod icl;
pub mod numeric;
pub mod response;
pub mod scalar;
pub mod spn;
pub mod theory;

pub use scalar::Scalar;

/// Default scalar used by the harness and CLI.
pub type F = f64;
pub type Vector64 = numeric::Vector<F>;
pub type Matrix64 = numeric::Matrix<F>;
pub type GaussianSummary64 = numeric::GaussianSummary<F>;
