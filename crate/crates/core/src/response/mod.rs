//! Agent best-response models: score functions, cost geometries, the four
//! response regimes and the three misspecified-response variants.

pub mod config;
pub mod regimes;
pub mod solver;

pub use config::ManipulationConfig;
pub use regimes::{
    estimate_cost_matrix, respond_heterogeneous, respond_misspecified, respond_noisy,
    respond_standard, respond_with_model,
};
pub use solver::{best_response_closed_form, best_response_numeric, NumericSolveOptions};

use crate::error::ResponseError;
use crate::numeric::{Cholesky, Matrix, Vector};
use crate::scalar::Scalar;

/// Differentiable scalar decision rule with gradient access.
#[derive(Debug, Clone)]
pub enum ScoreFunction<T: Scalar> {
    /// f(x) = ⟨w, x⟩ + b
    Linear { w: Vector<T>, b: T },
    /// f(x) = σ(⟨w, x⟩ + b)
    SigmoidLinear { w: Vector<T>, b: T },
    /// Linear readout extracted from the attention surrogate; behaves as a
    /// linear rule but keeps its provenance visible.
    SurrogateReadout { w: Vector<T>, b: T },
}

impl<T: Scalar> ScoreFunction<T> {
    pub fn dim(&self) -> usize {
        match self {
            ScoreFunction::Linear { w, .. }
            | ScoreFunction::SigmoidLinear { w, .. }
            | ScoreFunction::SurrogateReadout { w, .. } => w.len(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ScoreFunction::Linear { .. } => "linear",
            ScoreFunction::SigmoidLinear { .. } => "sigmoid-linear",
            ScoreFunction::SurrogateReadout { .. } => "surrogate-readout",
        }
    }

    pub fn score(&self, x: &Vector<T>) -> T {
        match self {
            ScoreFunction::Linear { w, b } | ScoreFunction::SurrogateReadout { w, b } => {
                w.dot(x) + *b
            }
            ScoreFunction::SigmoidLinear { w, b } => sigmoid(w.dot(x) + *b),
        }
    }

    pub fn gradient(&self, x: &Vector<T>) -> Vector<T> {
        match self {
            ScoreFunction::Linear { w, .. } | ScoreFunction::SurrogateReadout { w, .. } => {
                w.clone()
            }
            ScoreFunction::SigmoidLinear { w, b } => {
                let s = sigmoid(w.dot(x) + *b);
                w.scale(s * (T::one() - s))
            }
        }
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Cost geometry: Euclidean or Mahalanobis with an SPD matrix.
#[derive(Debug, Clone)]
pub enum CostGeometry<T: Scalar> {
    Euclidean,
    Mahalanobis { m: Matrix<T> },
}

impl<T: Scalar> CostGeometry<T> {
    pub fn name(&self) -> &'static str {
        match self {
            CostGeometry::Euclidean => "euclidean",
            CostGeometry::Mahalanobis { .. } => "mahalanobis",
        }
    }

    /// Quadratic form ΔᵀMΔ on the subspace selected by `idx`.
    fn quad_form(&self, delta: &[T], idx: &[usize]) -> T {
        match self {
            CostGeometry::Euclidean => delta.iter().map(|&d| d * d).sum(),
            CostGeometry::Mahalanobis { m } => {
                let mut acc = T::zero();
                for (a, &ia) in idx.iter().enumerate() {
                    for (b, &ib) in idx.iter().enumerate() {
                        acc += delta[a] * m[(ia, ib)] * delta[b];
                    }
                }
                acc
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostExponent {
    /// c(x,x') = (x'−x)ᵀM(x'−x); admits the closed-form response.
    Quadratic,
    /// c(x,x') = √((x'−x)ᵀM(x'−x)); numeric solver only.
    Norm,
}

/// Manipulation cost: geometry, exponent and the cost-benefit weight λ.
#[derive(Debug, Clone)]
pub struct CostModel<T: Scalar> {
    pub geometry: CostGeometry<T>,
    pub exponent: CostExponent,
    pub lambda: T,
}

impl<T: Scalar> CostModel<T> {
    pub fn euclidean_quadratic(lambda: T) -> Self {
        CostModel {
            geometry: CostGeometry::Euclidean,
            exponent: CostExponent::Quadratic,
            lambda,
        }
    }

    pub fn mahalanobis_quadratic(m: Matrix<T>, lambda: T) -> Self {
        CostModel {
            geometry: CostGeometry::Mahalanobis { m },
            exponent: CostExponent::Quadratic,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<(), ResponseError> {
        if self.lambda <= T::zero() {
            return Err(ResponseError::InvalidHyperparameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// c(x, x') restricted to the coordinates in `idx` (movement outside the
    /// manipulable set never happens, so it carries no cost contribution).
    pub fn cost_on(&self, x: &Vector<T>, x_prime: &Vector<T>, idx: &[usize]) -> T {
        let delta: Vec<T> = idx.iter().map(|&j| x_prime[j] - x[j]).collect();
        let q = self.geometry.quad_form(&delta, idx);
        match self.exponent {
            CostExponent::Quadratic => q,
            CostExponent::Norm => q.max(T::zero()).sqrt(),
        }
    }

    pub fn cost(&self, x: &Vector<T>, x_prime: &Vector<T>) -> T {
        let idx: Vec<usize> = (0..x.len()).collect();
        self.cost_on(x, x_prime, &idx)
    }

    /// Dense Mahalanobis matrix restricted to `idx`; identity for Euclidean.
    pub fn matrix_on(&self, idx: &[usize]) -> Matrix<T> {
        match &self.geometry {
            CostGeometry::Euclidean => Matrix::identity(idx.len()),
            CostGeometry::Mahalanobis { m } => m.submatrix(idx),
        }
    }

    pub(crate) fn cholesky_on(&self, idx: &[usize]) -> Result<Cholesky<T>, ResponseError> {
        Ok(Cholesky::new(&self.matrix_on(idx))?)
    }
}

/// Utility the agent maximizes: U(x') = f(x') − λ·c(x,x').
pub fn utility<T: Scalar>(
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    x: &Vector<T>,
    x_prime: &Vector<T>,
    idx: &[usize],
) -> T {
    f.score(x_prime) - cost.lambda * cost.cost_on(x, x_prime, idx)
}

/// Response regime tag with its hyperparameters.
#[derive(Debug, Clone)]
pub enum Regime<T: Scalar> {
    Standard,
    /// Per-agent zero-mean Gaussian perturbation of the perceived gradient.
    Noisy { sigma: T },
    /// Per-agent cost weight λ_i ~ Uniform(λ_min, λ_max).
    Heterogeneous { lambda_min: T, lambda_max: T },
}

impl<T: Scalar> Regime<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Standard => "standard",
            Regime::Noisy { .. } => "noisy",
            Regime::Heterogeneous { .. } => "heterogeneous",
        }
    }
}

/// Decision-maker-side misspecification of the response model.
#[derive(Debug, Clone)]
pub enum Misspecification<T: Scalar> {
    None,
    /// Estimated manipulated features carry additive N(0, σ²I) noise.
    Inaccurate { sigma: T },
    /// Only a random subset of features is modeled as manipulated:
    /// x̃ = m ⊙ b(x) + (1−m) ⊙ x with a Bernoulli(density) mask, drawn
    /// per agent by default or once from a fixed seed.
    Incomplete {
        density: f64,
        mask_seed: Option<u64>,
    },
    /// The true cost geometry is replaced by Euclidean quadratic.
    Approximate,
}

impl<T: Scalar> Misspecification<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Misspecification::None => "none",
            Misspecification::Inaccurate { .. } => "inaccurate",
            Misspecification::Incomplete { .. } => "incomplete",
            Misspecification::Approximate => "approximate",
        }
    }
}

/// Full manipulation model: regime + cost geometry + misspecification.
#[derive(Debug, Clone)]
pub struct ManipulationModel<T: Scalar> {
    pub regime: Regime<T>,
    pub cost: CostModel<T>,
    pub misspec: Misspecification<T>,
}

impl<T: Scalar> ManipulationModel<T> {
    pub fn standard(cost: CostModel<T>) -> Self {
        ManipulationModel {
            regime: Regime::Standard,
            cost,
            misspec: Misspecification::None,
        }
    }

    pub fn validate(&self) -> Result<(), ResponseError> {
        self.cost.validate()?;
        match &self.regime {
            Regime::Noisy { sigma } => {
                if *sigma < T::zero() {
                    return Err(ResponseError::InvalidHyperparameter(
                        "noise sigma must be >= 0".into(),
                    ));
                }
            }
            Regime::Heterogeneous {
                lambda_min,
                lambda_max,
            } => {
                if *lambda_min <= T::zero() || *lambda_max < *lambda_min {
                    return Err(ResponseError::InvalidHyperparameter(
                        "need 0 < lambda_min <= lambda_max".into(),
                    ));
                }
            }
            Regime::Standard => {}
        }
        Ok(())
    }
}

/// How a response was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    ClosedForm,
    Numeric,
}

/// Result of solving one agent's response.
///
/// `utility_gain` is the improvement of the objective the solver actually
/// optimized (for misspecified variants, that is the underlying response
/// solve before the decision-maker-side distortion): it is never below
/// −1e-9.
#[derive(Debug, Clone)]
pub struct BestResponseReport<T: Scalar> {
    pub x_prime: Vector<T>,
    pub delta: Vector<T>,
    pub utility_gain: T,
    pub solver: SolverTag,
    pub iterations: usize,
    pub diagnostics: Option<String>,
}

impl<T: Scalar> BestResponseReport<T> {
    pub(crate) fn at_origin(x: &Vector<T>, solver: SolverTag) -> Self {
        BestResponseReport {
            x_prime: x.clone(),
            delta: Vector::zeros(x.len()),
            utility_gain: T::zero(),
            solver,
            iterations: 0,
            diagnostics: None,
        }
    }
}

pub(crate) fn full_index_set(d: usize) -> Vec<usize> {
    (0..d).collect()
}

pub(crate) fn masked_index_set(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| if m { Some(i) } else { None })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_gradient_is_constant_field() {
        let f = ScoreFunction::Linear {
            w: Vector::from_vec(vec![2.0, -1.0]),
            b: 0.5,
        };
        let g1 = f.gradient(&Vector::from_vec(vec![0.0, 0.0]));
        let g2 = f.gradient(&Vector::from_vec(vec![5.0, -3.0]));
        assert_eq!(g1, g2);
        assert_eq!(g1.as_slice(), &[2.0, -1.0]);
    }

    #[test]
    fn sigmoid_gradient_vanishes_at_saturation() {
        let f = ScoreFunction::SigmoidLinear {
            w: Vector::from_vec(vec![10.0f64]),
            b: 0.0,
        };
        let g = f.gradient(&Vector::from_vec(vec![10.0]));
        assert!(g[0].abs() < 1e-10);
    }

    #[test]
    fn cost_zero_at_origin_positive_elsewhere() {
        let m = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let cost = CostModel::mahalanobis_quadratic(m, 1.0);
        let x = Vector::from_vec(vec![1.0, 2.0]);
        assert_eq!(cost.cost(&x, &x), 0.0);
        let y = Vector::from_vec(vec![1.5, 2.0]);
        assert!(cost.cost(&x, &y) > 0.0);
    }

    #[test]
    fn norm_exponent_takes_square_root() {
        let cost = CostModel {
            geometry: CostGeometry::Euclidean,
            exponent: CostExponent::Norm,
            lambda: 1.0,
        };
        let x = Vector::from_vec(vec![0.0, 0.0]);
        let y = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(cost.cost(&x, &y), 5.0);
    }

    #[test]
    fn invalid_lambda_rejected() {
        let cost = CostModel::<f64>::euclidean_quadratic(0.0);
        assert!(cost.validate().is_err());
    }
}
