//! Linear self-attention with explicit block weights, the stacked-layer
//! in-context predictor, the attention-induced strategic update, and the
//! coupled trajectory simulator.
//!
//! Layers and predictions are pure; population-level simulations can fan
//! out per starting point.

pub mod layer;
pub mod surrogate;
pub mod tokens;
pub mod trajectory;
pub mod update;

pub use layer::{build_constructed_layer, build_preconditioned_layer, ConstructedAttentionLayer};
pub use surrogate::{
    implicit_descent, surrogate_predict, surrogate_predict_batch, ImplicitState, SurrogateConfig,
};
pub use tokens::TokenSequence;
pub use trajectory::{simulate_trajectories, trajectory_rows, StepMetrics, TrajectoryRecord};
pub use update::{attention_weights, icl_update, FeaturePair};
