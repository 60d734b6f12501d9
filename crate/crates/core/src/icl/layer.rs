//! Linear self-attention layers with the explicit block construction whose
//! application equals one preconditioned gradient-descent step on the
//! context least-squares objective.

use crate::error::IclError;
use crate::numeric::Matrix;
use crate::scalar::{lit, Scalar};

use super::tokens::TokenSequence;

/// One constructed linear self-attention layer over width d+ny tokens:
///
///   W_Q = W_K = [[I_d, 0], [0, 0]]
///   W_V       = [[0,   0], [W₀, −I_ny]]
///   P         = (η/N)·I
///
/// Applying it adds (0, −ΔW·x_j) to every token, where
/// ΔW = −(η/N) Σᵢ (W₀xᵢ − yᵢ) xᵢᵀ over the N context tokens. With a
/// key-side preconditioner A the key block becomes [[A, 0], [0, 0]] and
/// P = (1/N)·I, realizing the step W ← W − (1/N) Σ (Wxᵢ−yᵢ)(Axᵢ)ᵀ.
#[derive(Debug, Clone)]
pub struct ConstructedAttentionLayer<T: Scalar> {
    w_q: Matrix<T>,
    w_k: Matrix<T>,
    w_v: Matrix<T>,
    p: Matrix<T>,
    eta: T,
    n_context: usize,
    d: usize,
    ny: usize,
}

/// Exact block weights for step size η over N context tokens.
pub fn build_constructed_layer<T: Scalar>(
    w0: &Matrix<T>,
    eta: T,
    n_context: usize,
) -> Result<ConstructedAttentionLayer<T>, IclError> {
    build_layer_inner(w0, Some(eta), None, n_context)
}

/// Variant carrying an explicit d×d preconditioner in the key block.
pub fn build_preconditioned_layer<T: Scalar>(
    w0: &Matrix<T>,
    precond: &Matrix<T>,
    n_context: usize,
) -> Result<ConstructedAttentionLayer<T>, IclError> {
    build_layer_inner(w0, None, Some(precond), n_context)
}

fn build_layer_inner<T: Scalar>(
    w0: &Matrix<T>,
    eta: Option<T>,
    precond: Option<&Matrix<T>>,
    n_context: usize,
) -> Result<ConstructedAttentionLayer<T>, IclError> {
    let ny = w0.rows();
    let d = w0.cols();
    if n_context == 0 {
        return Err(IclError::EmptyContext);
    }
    if let Some(eta) = eta {
        if eta < T::zero() || !eta.is_finite() {
            return Err(IclError::InvalidStep(eta.to_f64().unwrap_or(f64::NAN)));
        }
    }
    if let Some(a) = precond {
        if a.rows() != d || a.cols() != d {
            return Err(IclError::TokenWidthMismatch {
                expected: d,
                got: a.rows(),
            });
        }
    }
    let width = d + ny;

    let mut w_q = Matrix::zeros(width, width);
    for i in 0..d {
        w_q[(i, i)] = T::one();
    }
    let mut w_k = Matrix::zeros(width, width);
    match precond {
        Some(a) => {
            for i in 0..d {
                for j in 0..d {
                    w_k[(i, j)] = a[(i, j)];
                }
            }
        }
        None => {
            for i in 0..d {
                w_k[(i, i)] = T::one();
            }
        }
    }

    let mut w_v = Matrix::zeros(width, width);
    for i in 0..ny {
        for j in 0..d {
            w_v[(d + i, j)] = w0[(i, j)];
        }
        w_v[(d + i, d + i)] = -T::one();
    }

    let p_scale = match eta {
        Some(eta) => eta / lit(n_context as f64),
        None => T::one() / lit(n_context as f64),
    };
    let p = Matrix::identity(width).scale(p_scale);

    Ok(ConstructedAttentionLayer {
        w_q,
        w_k,
        w_v,
        p,
        eta: eta.unwrap_or_else(T::one),
        n_context,
        d,
        ny,
    })
}

impl<T: Scalar> ConstructedAttentionLayer<T> {
    pub fn w_q(&self) -> &Matrix<T> {
        &self.w_q
    }

    pub fn w_k(&self) -> &Matrix<T> {
        &self.w_k
    }

    pub fn w_v(&self) -> &Matrix<T> {
        &self.w_v
    }

    pub fn projection(&self) -> &Matrix<T> {
        &self.p
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn n_context(&self) -> usize {
        self.n_context
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn label_dim(&self) -> usize {
        self.ny
    }

    /// Extract the W₀ block from W_V, bit-exact round trip of construction.
    pub fn w0_block(&self) -> Matrix<T> {
        Matrix::from_fn(self.ny, self.d, |i, j| self.w_v[(self.d + i, j)])
    }

    /// One linear self-attention pass:
    /// e_j ← e_j + P · Σᵢ (W_V eᵢ) ⟨W_K eᵢ, W_Q e_j⟩ over context tokens i,
    /// applied to every token j (context and queries).
    ///
    /// The summed value vectors have a structurally zero feature block, so
    /// only label slots change.
    pub fn apply(&self, tokens: &TokenSequence<T>) -> Result<TokenSequence<T>, IclError> {
        if tokens.width() != self.d + self.ny {
            return Err(IclError::TokenWidthMismatch {
                expected: self.d + self.ny,
                got: tokens.width(),
            });
        }
        if tokens.n_context() != self.n_context {
            return Err(IclError::TokenWidthMismatch {
                expected: self.n_context,
                got: tokens.n_context(),
            });
        }
        let width = tokens.width();

        // S = Σᵢ (W_V eᵢ) ⊗ (W_K eᵢ)
        let mut s = Matrix::zeros(width, width);
        for i in 0..self.n_context {
            let e = tokens.token(i);
            let value = self.w_v.matvec(&e);
            let key = self.w_k.matvec(&e);
            s.add_outer_inplace(T::one(), &value, &key);
        }

        let mut out = tokens.clone();
        for j in 0..tokens.n_tokens() {
            let query = self.w_q.matvec(&tokens.token(j));
            let update = self.p.matvec(&s.matvec(&query));
            debug_assert!(
                update.as_slice()[..self.d].iter().all(|&v| v == T::zero()),
                "value vectors must leave feature slots untouched"
            );
            out.add_to_label_slot(j, &update.as_slice()[self.d..]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{RngStream, Vector};

    #[test]
    fn block_forms_are_exact() {
        let w0 = Matrix::from_rows(&[vec![0.0, 0.0]]);
        let layer = build_constructed_layer(&w0, 0.5, 4).unwrap();
        // W_V: upper-left zero, lower-left W0 (zero here), lower-right −I
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(layer.w_v()[(i, j)], 0.0);
            }
        }
        assert_eq!(layer.w_v()[(2, 0)], 0.0);
        assert_eq!(layer.w_v()[(2, 1)], 0.0);
        assert_eq!(layer.w_v()[(2, 2)], -1.0);
        // P = (eta/N) I
        assert_eq!(layer.projection()[(0, 0)], 0.125);
        assert_eq!(layer.projection()[(1, 1)], 0.125);
        assert_eq!(layer.projection()[(0, 1)], 0.0);
    }

    #[test]
    fn one_dim_query_weight_is_single_one() {
        let w0 = Matrix::from_rows(&[vec![0.7]]);
        let layer = build_constructed_layer(&w0, 1.0, 1).unwrap();
        assert_eq!(layer.w_q().rows(), 2);
        assert_eq!(layer.w_q()[(0, 0)], 1.0);
        assert_eq!(layer.w_q()[(0, 1)], 0.0);
        assert_eq!(layer.w_q()[(1, 0)], 0.0);
        assert_eq!(layer.w_q()[(1, 1)], 0.0);
    }

    #[test]
    fn block_roundtrip_is_bit_exact() {
        let mut rng = RngStream::new(15);
        let w0 = Matrix::from_fn(2, 3, |_, _| rng.standard_normal::<f64>());
        let layer = build_constructed_layer(&w0, 0.3, 7).unwrap();
        assert_eq!(layer.w0_block(), w0);
        assert_eq!(layer.eta(), 0.3);
        assert_eq!(layer.n_context(), 7);
    }

    #[test]
    fn zero_residual_context_leaves_tokens_unchanged() {
        // labels equal W0 x exactly, so the weight change vanishes
        let w0 = Matrix::from_rows(&[vec![1.0, -1.0]]);
        let ctx = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.5, 2.0]]);
        let labels = Vector::from_vec(vec![0.5, -2.5]);
        let queries = Matrix::from_rows(&[vec![0.3, 0.4]]);
        let w0_row = Vector::from_vec(vec![1.0, -1.0]);
        let seq = TokenSequence::scalar_labels(&ctx, &labels, &queries, &w0_row).unwrap();
        let layer = build_constructed_layer(&w0, 0.5, 2).unwrap();
        let out = layer.apply(&seq).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn zero_step_is_identity() {
        let w0 = Matrix::from_rows(&[vec![0.2, 0.1]]);
        let ctx = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]);
        let labels = Vector::from_vec(vec![1.0, -1.0]);
        let queries = Matrix::from_rows(&[vec![0.0, 1.0]]);
        let w0_row = Vector::from_vec(vec![0.2, 0.1]);
        let seq = TokenSequence::scalar_labels(&ctx, &labels, &queries, &w0_row).unwrap();
        let layer = build_constructed_layer(&w0, 0.0, 2).unwrap();
        let out = layer.apply(&seq).unwrap();
        assert_eq!(out, seq);
    }

    /// Independent oracle: explicit least-squares gradient step
    /// ΔW = −(η/N) Σ (W₀xᵢ − yᵢ) xᵢᵀ; label slots must change by −ΔW·x_j.
    fn explicit_label_updates(
        w0: &Matrix<f64>,
        ctx: &Matrix<f64>,
        labels: &Matrix<f64>,
        eta: f64,
        all_features: &[Vector<f64>],
    ) -> Vec<Vector<f64>> {
        let n = ctx.rows();
        let ny = labels.cols();
        let d = ctx.cols();
        let mut delta_w = Matrix::zeros(ny, d);
        for i in 0..n {
            let x = ctx.row_vector(i);
            let resid = w0.matvec(&x).sub(&labels.row_vector(i));
            delta_w.add_outer_inplace(-eta / n as f64, &resid, &x);
        }
        all_features
            .iter()
            .map(|x| delta_w.matvec(x).scale(-1.0))
            .collect()
    }

    #[test]
    fn layer_equals_explicit_gradient_step_seed7() {
        let mut rng = RngStream::new(7);
        let (n, d, eta) = (2usize, 2usize, 0.5f64);
        let ctx = Matrix::from_fn(n, d, |_, _| rng.standard_normal());
        let labels = Matrix::from_fn(n, 1, |_, _| rng.standard_normal::<f64>());
        let w0 = Matrix::from_fn(1, d, |_, _| rng.standard_normal::<f64>());
        let queries = Matrix::from_fn(1, d, |_, _| rng.standard_normal::<f64>());
        let seq = TokenSequence::new(&ctx, &labels, &queries, &w0).unwrap();
        let layer = build_constructed_layer(&w0, eta, n).unwrap();
        let out = layer.apply(&seq).unwrap();

        let features: Vec<Vector<f64>> = (0..seq.n_tokens()).map(|j| seq.feature_slot(j)).collect();
        let expected = explicit_label_updates(&w0, &ctx, &labels, eta, &features);
        for j in 0..seq.n_tokens() {
            let got = out.label_slot(j).sub(&seq.label_slot(j));
            for k in 0..1 {
                assert!(
                    (got[k] - expected[j][k]).abs() <= 1e-12,
                    "token {j}: {} vs {}",
                    got[k],
                    expected[j][k]
                );
            }
        }
    }

    #[test]
    fn feature_slots_are_bit_exact_invariant() {
        let mut rng = RngStream::new(23);
        for _ in 0..50 {
            let n = 1 + rng.index(8);
            let d = 1 + rng.index(4);
            let ctx = Matrix::from_fn(n, d, |_, _| rng.standard_normal::<f64>());
            let labels = Matrix::from_fn(n, 1, |_, _| rng.standard_normal::<f64>());
            let w0 = Matrix::from_fn(1, d, |_, _| rng.standard_normal::<f64>());
            let queries = Matrix::from_fn(2, d, |_, _| rng.standard_normal::<f64>());
            let seq = TokenSequence::new(&ctx, &labels, &queries, &w0).unwrap();
            let layer = build_constructed_layer(&w0, rng.uniform::<f64>(), n).unwrap();
            let out = layer.apply(&seq).unwrap();
            for j in 0..seq.n_tokens() {
                let before = seq.feature_slot(j);
                let after = out.feature_slot(j);
                for t in 0..d {
                    assert_eq!(before[t].to_bits(), after[t].to_bits());
                }
            }
        }
    }
}
