//! Token sequences: context tokens carry ground-truth labels, trailing
//! query tokens carry the (x, −W₀x) initialization.

use crate::error::IclError;
use crate::numeric::{Matrix, Vector};
use crate::scalar::Scalar;

/// A sequence of `(feature slot, label slot)` tokens. The first
/// `n_context` tokens are context examples; the remaining tokens are
/// queries. Attention reads keys and values from context tokens only.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence<T: Scalar> {
    tokens: Matrix<T>,
    d: usize,
    ny: usize,
    n_context: usize,
}

impl<T: Scalar> TokenSequence<T> {
    /// Build a sequence from context examples and query points. Query label
    /// slots are initialized to −W₀·x.
    pub fn new(
        context_features: &Matrix<T>,
        context_labels: &Matrix<T>,
        queries: &Matrix<T>,
        w0: &Matrix<T>,
    ) -> Result<Self, IclError> {
        let n = context_features.rows();
        let m = queries.rows();
        if n == 0 {
            return Err(IclError::EmptyContext);
        }
        let d = context_features.cols();
        let ny = context_labels.cols();
        if context_labels.rows() != n || queries.cols() != d {
            return Err(IclError::TokenWidthMismatch {
                expected: d,
                got: queries.cols(),
            });
        }
        if w0.rows() != ny || w0.cols() != d {
            return Err(IclError::TokenWidthMismatch {
                expected: ny * d,
                got: w0.rows() * w0.cols(),
            });
        }
        let width = d + ny;
        let mut tokens = Matrix::zeros(n + m, width);
        for i in 0..n {
            for j in 0..d {
                tokens[(i, j)] = context_features[(i, j)];
            }
            for k in 0..ny {
                tokens[(i, d + k)] = context_labels[(i, k)];
            }
        }
        for q in 0..m {
            let x = queries.row_vector(q);
            let init = w0.matvec(&x);
            for j in 0..d {
                tokens[(n + q, j)] = x[j];
            }
            for k in 0..ny {
                tokens[(n + q, d + k)] = -init[k];
            }
        }
        Ok(TokenSequence {
            tokens,
            d,
            ny,
            n_context: n,
        })
    }

    /// Scalar-label convenience: labels and queries as vectors, W₀ a row.
    pub fn scalar_labels(
        context_features: &Matrix<T>,
        context_labels: &Vector<T>,
        queries: &Matrix<T>,
        w0_row: &Vector<T>,
    ) -> Result<Self, IclError> {
        let labels = Matrix::from_fn(context_labels.len(), 1, |i, _| context_labels[i]);
        let w0 = Matrix::from_fn(1, w0_row.len(), |_, j| w0_row[j]);
        TokenSequence::new(context_features, &labels, queries, &w0)
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn label_dim(&self) -> usize {
        self.ny
    }

    pub fn width(&self) -> usize {
        self.d + self.ny
    }

    pub fn n_context(&self) -> usize {
        self.n_context
    }

    pub fn n_queries(&self) -> usize {
        self.tokens.rows() - self.n_context
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.rows()
    }

    pub fn token(&self, j: usize) -> Vector<T> {
        self.tokens.row_vector(j)
    }

    pub fn feature_slot(&self, j: usize) -> Vector<T> {
        Vector::from_vec(self.tokens.row(j)[..self.d].to_vec())
    }

    pub fn label_slot(&self, j: usize) -> Vector<T> {
        Vector::from_vec(self.tokens.row(j)[self.d..].to_vec())
    }

    pub(crate) fn add_to_label_slot(&mut self, j: usize, update: &[T]) {
        debug_assert_eq!(update.len(), self.ny);
        for (k, &u) in update.iter().enumerate() {
            self.tokens[(j, self.d + k)] += u;
        }
    }

    /// Scalar prediction read-out for a query token: the negated label slot.
    pub fn query_score(&self, q: usize) -> T {
        debug_assert_eq!(self.ny, 1, "scalar readout needs a 1-dim label slot");
        -self.tokens[(self.n_context + q, self.d)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_label_slot_initialized_to_negated_w0x() {
        let ctx = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let labels = Vector::from_vec(vec![1.0]);
        let queries = Matrix::from_rows(&[vec![2.0, 3.0]]);
        let w0 = Vector::from_vec(vec![0.5, -1.0]);
        let seq = TokenSequence::scalar_labels(&ctx, &labels, &queries, &w0).unwrap();
        // -(0.5*2 - 1*3) = 2
        assert_eq!(seq.label_slot(1).as_slice(), &[2.0]);
        assert_eq!(seq.query_score(0), -2.0);
    }

    #[test]
    fn context_tokens_carry_ground_truth() {
        let ctx = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let labels = Vector::from_vec(vec![1.0, -1.0]);
        let queries = Matrix::from_rows(&[vec![0.0]]);
        let w0 = Vector::from_vec(vec![0.0]);
        let seq = TokenSequence::scalar_labels(&ctx, &labels, &queries, &w0).unwrap();
        assert_eq!(seq.label_slot(0).as_slice(), &[1.0]);
        assert_eq!(seq.label_slot(1).as_slice(), &[-1.0]);
        assert_eq!(seq.n_context(), 2);
        assert_eq!(seq.n_queries(), 1);
    }

    #[test]
    fn empty_context_rejected() {
        let ctx = Matrix::zeros(0, 2);
        let labels = Vector::zeros(0);
        let queries = Matrix::from_rows(&[vec![0.0, 0.0]]);
        let w0 = Vector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(
            TokenSequence::scalar_labels(&ctx, &labels, &queries, &w0),
            Err(IclError::EmptyContext)
        ));
    }
}
