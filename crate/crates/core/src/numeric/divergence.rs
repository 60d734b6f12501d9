//! Statistical divergences: closed-form Gaussian KL (via moment matching)
//! and the cosine-based direction divergence.

use crate::error::NumericError;
use crate::scalar::{lit, Scalar};

use super::linalg::{
    default_shrinkage, row_mean, sample_covariance, shrink_spd, Cholesky, Matrix, Vector,
};

/// First and second moments of an empirical feature distribution.
#[derive(Debug, Clone)]
pub struct GaussianSummary<T: Scalar> {
    pub mean: Vector<T>,
    pub cov: Matrix<T>,
    pub count: usize,
}

impl<T: Scalar> GaussianSummary<T> {
    pub fn new(mean: Vector<T>, cov: Matrix<T>, count: usize) -> Result<Self, NumericError> {
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(NumericError::DimensionMismatch {
                expected: format!("{0}x{0} covariance", mean.len()),
                got: format!("{}x{}", cov.rows(), cov.cols()),
            });
        }
        cov.check_symmetric(lit(1e-8))?;
        Ok(GaussianSummary { mean, cov, count })
    }

    /// Fit mean and covariance to the rows of `data`, then shrink the
    /// covariance so its eigenvalues sit at or above the shrinkage floor.
    pub fn fit(data: &Matrix<T>) -> Result<Self, NumericError> {
        let mean = row_mean(data);
        let raw = sample_covariance(data);
        let eps = default_shrinkage(&raw).max(lit(1e-9));
        let cov = shrink_spd(&raw, eps)?;
        GaussianSummary::new(mean, cov, data.rows())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Closed-form KL divergence between two Gaussians, in nats.
///
/// KL(p||q) = ½ ( tr(Σq⁻¹Σp) + (μq−μp)ᵀΣq⁻¹(μq−μp) − d + ln det Σq − ln det Σp )
pub fn gaussian_kl<T: Scalar>(
    p: &GaussianSummary<T>,
    q: &GaussianSummary<T>,
) -> Result<T, NumericError> {
    if p.dim() != q.dim() {
        return Err(NumericError::DimensionMismatch {
            expected: format!("{}", p.dim()),
            got: format!("{}", q.dim()),
        });
    }
    let d = p.dim();
    let chol_q = Cholesky::new(&q.cov)?;
    let chol_p = Cholesky::new(&p.cov)?;

    let mut trace = T::zero();
    for j in 0..d {
        let col = p.cov.column(j);
        let solved = chol_q.solve(&col);
        trace += solved[j];
    }

    let diff = q.mean.sub(&p.mean);
    let maha = diff.dot(&chol_q.solve(&diff));

    let half = lit::<T>(0.5);
    let kl = half * (trace + maha - lit::<T>(d as f64) + chol_q.log_det() - chol_p.log_det());
    if !kl.is_finite() {
        return Err(NumericError::NonFinite {
            context: "gaussian_kl".into(),
        });
    }
    // Clamp the tiny negative values closed-form cancellation can produce.
    Ok(kl.max(T::zero()))
}

/// 1 − ⟨a,b⟩ / (‖a‖‖b‖), in [0, 2]. Errors on zero-norm input.
pub fn cosine_divergence<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<T, NumericError> {
    if a.len() != b.len() {
        return Err(NumericError::DimensionMismatch {
            expected: format!("{}", a.len()),
            got: format!("{}", b.len()),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == T::zero() || nb == T::zero() {
        return Err(NumericError::DegenerateDirection);
    }
    Ok(T::one() - a.dot(b) / (na * nb))
}
