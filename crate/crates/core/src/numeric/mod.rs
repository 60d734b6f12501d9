//! Deterministic dense linear algebra, seeded randomness, and divergence
//! utilities shared by all modules. Pure functions over immutable inputs;
//! safe to call from concurrent workers.

pub mod divergence;
pub mod linalg;
pub mod rng;

pub use divergence::{cosine_divergence, gaussian_kl, GaussianSummary};
pub use linalg::{
    default_shrinkage, row_mean, sample_covariance, shrink_spd, Cholesky, Matrix, Vector,
};
pub use rng::RngStream;
