//! Stacked-layer in-context predictor.
//!
//! `surrogate_predict` runs L constructed attention layers over the token
//! sequence and reads the negated query label slot. The equivalent
//! implicit path — L preconditioned gradient-descent steps on the context
//! least-squares risk from w₀ = 0 — is exposed as [`ImplicitState`] and
//! kept separate so the two routes can be checked against each other.

use crate::error::IclError;
use crate::numeric::{Matrix, Vector};
use crate::scalar::Scalar;

use super::layer::{build_constructed_layer, build_preconditioned_layer};
use super::tokens::TokenSequence;

/// Backbone configuration: layer count, step size, optional per-layer
/// preconditioners (shape-checked, default η·I).
#[derive(Debug, Clone)]
pub struct SurrogateConfig<T: Scalar> {
    pub layers: usize,
    pub eta: T,
    pub precond: Option<Vec<Matrix<T>>>,
}

impl<T: Scalar> SurrogateConfig<T> {
    pub fn new(layers: usize, eta: T) -> Self {
        SurrogateConfig {
            layers,
            eta,
            precond: None,
        }
    }

    fn validate(&self, d: usize) -> Result<(), IclError> {
        if self.layers == 0 {
            return Err(IclError::ZeroLayers);
        }
        if !self.eta.is_finite() || self.eta < T::zero() {
            return Err(IclError::InvalidStep(self.eta.to_f64().unwrap_or(f64::NAN)));
        }
        if let Some(mats) = &self.precond {
            if mats.len() != self.layers {
                return Err(IclError::TokenWidthMismatch {
                    expected: self.layers,
                    got: mats.len(),
                });
            }
            for a in mats {
                if a.rows() != d || a.cols() != d {
                    return Err(IclError::TokenWidthMismatch {
                        expected: d,
                        got: a.rows(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Weight iterates of the implicit gradient-descent view:
/// w_{ℓ+1} = w_ℓ − A_ℓ ∇R(w_ℓ) with R(w) = (1/2N) Σ (⟨w,xᵢ⟩ − yᵢ)²,
/// starting from w₀ = 0, A_ℓ = η·I unless preconditioners are given.
#[derive(Debug, Clone)]
pub struct ImplicitState<T: Scalar> {
    pub iterates: Vec<Vector<T>>,
}

impl<T: Scalar> ImplicitState<T> {
    pub fn final_weights(&self) -> &Vector<T> {
        self.iterates.last().expect("at least w0")
    }

    /// Linear readout of the layer-ℓ state at a query point.
    pub fn readout(&self, layer: usize, x: &Vector<T>) -> T {
        self.iterates[layer].dot(x)
    }
}

/// Run the explicit preconditioned descent on the context least squares.
pub fn implicit_descent<T: Scalar>(
    context_features: &Matrix<T>,
    context_labels: &Vector<T>,
    config: &SurrogateConfig<T>,
) -> Result<ImplicitState<T>, IclError> {
    let n = context_features.rows();
    let d = context_features.cols();
    if n == 0 {
        return Err(IclError::EmptyContext);
    }
    config.validate(d)?;
    let n_scalar = T::from_usize(n).unwrap();
    let mut w = Vector::zeros(d);
    let mut iterates = vec![w.clone()];
    for layer in 0..config.layers {
        // ∇R(w) = (1/N) Σ (⟨w,xᵢ⟩ − yᵢ) xᵢ
        let mut grad = Vector::zeros(d);
        for i in 0..n {
            let x = context_features.row_vector(i);
            let resid = w.dot(&x) - context_labels[i];
            grad.axpy_inplace(resid / n_scalar, &x);
        }
        match &config.precond {
            Some(mats) => {
                let step = mats[layer].matvec(&grad);
                w = w.sub(&step);
            }
            None => {
                w = w.sub(&grad.scale(config.eta));
            }
        }
        iterates.push(w.clone());
    }
    Ok(ImplicitState { iterates })
}

/// Forward pass: build the constructed layer for this context size, apply
/// it L times, and return the negated query label slots.
pub fn surrogate_predict_batch<T: Scalar>(
    context_features: &Matrix<T>,
    context_labels: &Vector<T>,
    queries: &Matrix<T>,
    config: &SurrogateConfig<T>,
) -> Result<Vec<T>, IclError> {
    let n = context_features.rows();
    let d = context_features.cols();
    if n == 0 {
        return Err(IclError::EmptyContext);
    }
    config.validate(d)?;
    let w0_row = Vector::zeros(d);
    let mut seq =
        TokenSequence::scalar_labels(context_features, context_labels, queries, &w0_row)?;
    let w0 = Matrix::zeros(1, d);
    match &config.precond {
        Some(mats) => {
            for a in mats {
                let layer = build_preconditioned_layer(&w0, a, n)?;
                seq = layer.apply(&seq)?;
            }
        }
        None => {
            // identical layers: the label slots accumulate the residual
            // corrections, so reapplication realizes successive GD steps
            let layer = build_constructed_layer(&w0, config.eta, n)?;
            for _ in 0..config.layers {
                seq = layer.apply(&seq)?;
            }
        }
    }
    Ok((0..queries.rows()).map(|q| seq.query_score(q)).collect())
}

/// Single-query forward pass returning the scalar score.
pub fn surrogate_predict<T: Scalar>(
    context_features: &Matrix<T>,
    context_labels: &Vector<T>,
    query: &Vector<T>,
    config: &SurrogateConfig<T>,
) -> Result<T, IclError> {
    let queries = Matrix::from_fn(1, query.len(), |_, j| query[j]);
    Ok(surrogate_predict_batch(context_features, context_labels, &queries, config)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    #[test]
    fn single_point_context_converges_to_label() {
        // scalar GD oracle: score after L steps is y(1 − (1−η‖x‖²)^L)
        let ctx = Matrix::from_rows(&[vec![1.0f64, 0.0]]);
        let labels = Vector::from_vec(vec![1.0]);
        let query = Vector::from_vec(vec![1.0, 0.0]);
        let config = SurrogateConfig::new(500, 0.1);
        let score = surrogate_predict(&ctx, &labels, &query, &config).unwrap();
        assert!((score - 1.0).abs() <= 0.05, "score {score}");
        let oracle = 1.0 - (1.0f64 - 0.1).powi(500);
        assert!((score - oracle).abs() <= 1e-9);
    }

    #[test]
    fn single_layer_zero_step_scores_zero() {
        let ctx = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
        let labels = Vector::from_vec(vec![1.0, -1.0]);
        let query = Vector::from_vec(vec![0.7]);
        let config = SurrogateConfig::new(1, 0.0);
        let score = surrogate_predict(&ctx, &labels, &query, &config).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn zero_layers_forbidden() {
        let ctx = Matrix::from_rows(&[vec![1.0]]);
        let labels = Vector::from_vec(vec![1.0]);
        let query = Vector::from_vec(vec![1.0]);
        let config = SurrogateConfig::new(0, 0.1);
        assert!(matches!(
            surrogate_predict(&ctx, &labels, &query, &config),
            Err(IclError::ZeroLayers)
        ));
    }

    #[test]
    fn stacked_layers_match_implicit_descent() {
        let mut rng = RngStream::new(40);
        for &layers in &[1usize, 10, 100] {
            let n = 4 + rng.index(12);
            let d = 1 + rng.index(5);
            let ctx = Matrix::from_fn(n, d, |_, _| rng.standard_normal::<f64>());
            let labels =
                Vector::from_vec((0..n).map(|_| rng.standard_normal::<f64>()).collect());
            let queries = Matrix::from_fn(3, d, |_, _| rng.standard_normal::<f64>());
            let config = SurrogateConfig::new(layers, 0.2);
            let scores =
                surrogate_predict_batch(&ctx, &labels, &queries, &config).unwrap();
            let state = implicit_descent(&ctx, &labels, &config).unwrap();
            for q in 0..3 {
                let expected = state.readout(layers, &queries.row_vector(q));
                let rel = (scores[q] - expected).abs() / expected.abs().max(1e-12);
                assert!(rel <= 1e-9, "L={layers} q={q}: {} vs {expected}", scores[q]);
            }
        }
    }

    #[test]
    fn query_slot_tracks_every_intermediate_iterate() {
        use crate::icl::layer::build_constructed_layer;
        use crate::icl::tokens::TokenSequence;
        let mut rng = RngStream::new(52);
        let (n, d, eta) = (12usize, 3usize, 0.25f64);
        let ctx = Matrix::from_fn(n, d, |_, _| rng.standard_normal::<f64>());
        let labels = Vector::from_vec((0..n).map(|_| rng.standard_normal::<f64>()).collect());
        let query = Matrix::from_fn(1, d, |_, _| rng.standard_normal::<f64>());
        let w0_row = Vector::zeros(d);
        let mut seq = TokenSequence::scalar_labels(&ctx, &labels, &query, &w0_row).unwrap();
        let layer = build_constructed_layer(&Matrix::zeros(1, d), eta, n).unwrap();
        let state = implicit_descent(&ctx, &labels, &SurrogateConfig::new(20, eta)).unwrap();
        for ell in 1..=20usize {
            seq = layer.apply(&seq).unwrap();
            let expected = state.readout(ell, &query.row_vector(0));
            let got = seq.query_score(0);
            let rel = (got - expected).abs() / expected.abs().max(1e-12);
            assert!(rel <= 1e-10, "layer {ell}: {got} vs {expected}");
        }
    }

    #[test]
    fn readout_is_negated_query_label_slot() {
        // one zero-step layer leaves the (x, -W0 x) initialization intact,
        // so the score must come out as +W0 x
        use crate::icl::layer::build_constructed_layer;
        use crate::icl::tokens::TokenSequence;
        let ctx = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let labels = Vector::from_vec(vec![1.0]);
        let query = Matrix::from_rows(&[vec![2.0, -1.0]]);
        let w0_row = Vector::from_vec(vec![0.5, 0.25]);
        let seq = TokenSequence::scalar_labels(&ctx, &labels, &query, &w0_row).unwrap();
        let w0 = Matrix::from_fn(1, 2, |_, j| w0_row[j]);
        let layer = build_constructed_layer(&w0, 0.0, 1).unwrap();
        let out = layer.apply(&seq).unwrap();
        // W0 x = 0.5*2 - 0.25 = 0.75; label slot holds -0.75
        assert_eq!(out.label_slot(1).as_slice(), &[-0.75]);
        assert_eq!(out.query_score(0), 0.75);
    }

    #[test]
    fn per_layer_preconditioners_shape_checked() {
        let ctx = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let labels = Vector::from_vec(vec![1.0]);
        let query = Vector::from_vec(vec![1.0, 0.0]);
        let bad = SurrogateConfig::<f64> {
            layers: 2,
            eta: 0.1,
            precond: Some(vec![Matrix::identity(2)]),
        };
        assert!(surrogate_predict(&ctx, &labels, &query, &bad).is_err());
        let good = SurrogateConfig {
            layers: 2,
            eta: 0.1,
            precond: Some(vec![Matrix::identity(2).scale(0.1); 2]),
        };
        // scaled-identity preconditioner equals the eta path
        let a = surrogate_predict(&ctx, &labels, &query, &good).unwrap();
        let b =
            surrogate_predict(&ctx, &labels, &query, &SurrogateConfig::new(2, 0.1)).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn separable_task_sign_accuracy() {
        use crate::data::{generate_synthetic, ScoreFamily, SyntheticTaskSpec};
        let spec = SyntheticTaskSpec {
            dim: 2,
            separation: 4.0,
            covariance_seed: 3,
            context_per_class: 100,
            test_per_class: 50,
            family: ScoreFamily::Linear,
        };
        let mut rng = RngStream::new(12);
        let ds = generate_synthetic::<f64>(&spec, &mut rng).unwrap();
        let ctx = ds.context_view();
        let test = ds.test_view();
        let labels = Vector::from_vec((0..ctx.n()).map(|i| ctx.label_value(i)).collect());
        let config = SurrogateConfig::new(50, 0.1);
        let scores =
            surrogate_predict_batch(ctx.features(), &labels, test.features(), &config).unwrap();
        let hits = scores
            .iter()
            .zip(test.labels())
            .filter(|(s, &l)| (**s >= 0.0) == (l == 1))
            .count();
        let acc = hits as f64 / test.n() as f64;
        assert!(acc > 0.9, "accuracy {acc}");
    }
}
