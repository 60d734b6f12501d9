//! Attention-induced strategic update: a softmax-weighted combination of
//! the context pairs' manipulation signals g_i = x̃_i − x_i.

use crate::error::IclError;
use crate::numeric::Vector;
use crate::scalar::{lit, Scalar};

/// One (original, manipulated) feature pair.
#[derive(Debug, Clone)]
pub struct FeaturePair<T: Scalar> {
    pub original: Vector<T>,
    pub manipulated: Vector<T>,
}

impl<T: Scalar> FeaturePair<T> {
    pub fn signal(&self) -> Vector<T> {
        self.manipulated.sub(&self.original)
    }
}

/// Softmax attention weights over feature-slot dot products
/// ⟨x, x_i⟩ / τ; τ defaults to √d.
pub fn attention_weights<T: Scalar>(
    pairs: &[FeaturePair<T>],
    x: &Vector<T>,
    temperature: Option<T>,
) -> Result<Vec<T>, IclError> {
    if pairs.is_empty() {
        return Err(IclError::EmptyContext);
    }
    let d = x.len();
    for pair in pairs {
        if pair.original.len() != d || pair.manipulated.len() != d {
            return Err(IclError::TokenWidthMismatch {
                expected: d,
                got: pair.original.len(),
            });
        }
    }
    let tau = match temperature {
        Some(t) => t,
        None => lit::<T>(d as f64).sqrt(),
    };
    let logits: Vec<T> = pairs.iter().map(|p| x.dot(&p.original) / tau).collect();
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Δ_ICL(x) = Σ α_i(x) · g_i with the identity value map on the feature
/// block.
pub fn icl_update<T: Scalar>(
    pairs: &[FeaturePair<T>],
    x: &Vector<T>,
    temperature: Option<T>,
) -> Result<Vector<T>, IclError> {
    let alphas = attention_weights(pairs, x, temperature)?;
    let mut delta = Vector::zeros(x.len());
    for (pair, &alpha) in pairs.iter().zip(alphas.iter()) {
        delta.axpy_inplace(alpha, &pair.signal());
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{cosine_divergence, Matrix, RngStream};
    use crate::response::{best_response_closed_form, CostModel, ScoreFunction};

    fn pair(orig: Vec<f64>, manip: Vec<f64>) -> FeaturePair<f64> {
        FeaturePair {
            original: Vector::from_vec(orig),
            manipulated: Vector::from_vec(manip),
        }
    }

    #[test]
    fn zero_signals_give_zero_update() {
        let pairs = vec![
            pair(vec![1.0, 0.0], vec![1.0, 0.0]),
            pair(vec![0.0, 1.0], vec![0.0, 1.0]),
        ];
        let x = Vector::from_vec(vec![0.5, 0.5]);
        let delta = icl_update(&pairs, &x, None).unwrap();
        assert_eq!(delta.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn singleton_softmax_returns_signal_exactly() {
        let pairs = vec![pair(vec![1.0, 2.0], vec![1.5, 1.0])];
        let x = Vector::from_vec(vec![-3.0, 0.2]);
        for &tau in &[0.1, 1.0, 100.0] {
            let delta = icl_update(&pairs, &x, Some(tau)).unwrap();
            assert_eq!(delta.as_slice(), &[0.5, -1.0]);
        }
    }

    #[test]
    fn weights_sum_to_one_and_are_permutation_equivariant() {
        let mut rng = RngStream::new(61);
        let pairs: Vec<FeaturePair<f64>> = (0..6)
            .map(|_| {
                let o = Vector::from_vec(vec![rng.standard_normal(), rng.standard_normal()]);
                let m = o.add(&Vector::from_vec(vec![
                    rng.standard_normal::<f64>() * 0.1,
                    rng.standard_normal::<f64>() * 0.1,
                ]));
                FeaturePair {
                    original: o,
                    manipulated: m,
                }
            })
            .collect();
        let x = Vector::from_vec(vec![0.3, -0.7]);
        let w = attention_weights(&pairs, &x, None).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let mut reversed = pairs.clone();
        reversed.reverse();
        let w_rev = attention_weights(&reversed, &x, None).unwrap();
        for i in 0..pairs.len() {
            // summation order shifts the normalizer by at most an ulp
            assert!((w[i] - w_rev[pairs.len() - 1 - i]).abs() < 1e-15);
        }
        // update itself is permutation-invariant up to summation order
        let d1 = icl_update(&pairs, &x, None).unwrap();
        let d2 = icl_update(&reversed, &x, None).unwrap();
        for j in 0..2 {
            assert!((d1[j] - d2[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_pairs_align_with_preconditioned_gradient() {
        let mut rng = RngStream::new(29);
        for _ in 0..25 {
            let d = 2 + rng.index(3);
            let w = Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
            let f = ScoreFunction::Linear { w: w.clone(), b: 0.0 };
            let a = Matrix::from_fn(d, d, |_, _| rng.standard_normal::<f64>());
            let m = crate::numeric::shrink_spd(&a.matmul(&a.transpose()), 0.1).unwrap();
            let cost = CostModel::mahalanobis_quadratic(m.clone(), 0.5 + rng.uniform::<f64>());
            let pairs: Vec<FeaturePair<f64>> = (0..8)
                .map(|_| {
                    let o =
                        Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
                    let rep = best_response_closed_form(&o, &f, &cost).unwrap();
                    FeaturePair {
                        original: o,
                        manipulated: rep.x_prime,
                    }
                })
                .collect();
            let x = Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
            let delta_icl = icl_update(&pairs, &x, None).unwrap();
            // Δ_GD direction: M⁻¹ w
            let chol = crate::numeric::Cholesky::new(&m).unwrap();
            let delta_gd = chol.solve(&w);
            let div = cosine_divergence(&delta_icl, &delta_gd).unwrap();
            assert!(div < 1e-10, "divergence {div}");
        }
    }

    #[test]
    fn empty_pairs_rejected() {
        let x = Vector::from_vec(vec![1.0]);
        assert!(matches!(
            icl_update::<f64>(&[], &x, None),
            Err(IclError::EmptyContext)
        ));
    }
}
