//! Best-response solvers: the quadratic-cost closed form and a gradient
//! ascent with backtracking line search for everything else.

use crate::error::ResponseError;
use crate::numeric::Vector;
use crate::scalar::{lit, Scalar};

use super::{
    full_index_set, utility, BestResponseReport, CostExponent, CostModel, ScoreFunction, SolverTag,
};

/// Closed-form response for quadratic costs:
/// x' = x + (1/(2λ)) M⁻¹ ∇f(x).
///
/// Ties (flat score) resolve to the minimum-norm move Δ = 0.
pub fn best_response_closed_form<T: Scalar>(
    x: &Vector<T>,
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
) -> Result<BestResponseReport<T>, ResponseError> {
    closed_form_masked(x, f, cost, &full_index_set(x.len()))
}

/// Closed form restricted to the manipulable coordinates in `idx`.
pub(crate) fn closed_form_masked<T: Scalar>(
    x: &Vector<T>,
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    idx: &[usize],
) -> Result<BestResponseReport<T>, ResponseError> {
    cost.validate()?;
    if cost.exponent != CostExponent::Quadratic {
        return Err(ResponseError::UnsupportedGeometry(
            "norm-exponent cost has no closed form; use the numeric solver".into(),
        ));
    }
    let grad = f.gradient(x);
    gradient_step_masked(x, f, cost, idx, &grad)
}

/// Core closed-form step from an externally supplied (possibly perturbed)
/// gradient. Shared by the standard and noisy regimes so that a zero
/// perturbation reproduces the standard response bit-exactly.
pub(crate) fn gradient_step_masked<T: Scalar>(
    x: &Vector<T>,
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    idx: &[usize],
    grad: &Vector<T>,
) -> Result<BestResponseReport<T>, ResponseError> {
    if idx.is_empty() {
        return Ok(BestResponseReport::at_origin(x, SolverTag::ClosedForm));
    }
    let grad_sub = Vector::from_vec(idx.iter().map(|&j| grad[j]).collect());
    let chol = cost.cholesky_on(idx)?;
    let scale = T::one() / (lit::<T>(2.0) * cost.lambda);
    let delta_sub = chol.solve(&grad_sub).scale(scale);

    let mut x_prime = x.clone();
    let mut delta = Vector::zeros(x.len());
    for (a, &j) in idx.iter().enumerate() {
        x_prime[j] = x[j] + delta_sub[a];
        delta[j] = delta_sub[a];
    }
    let gain = utility(f, cost, x, &x_prime, idx) - f.score(x);
    Ok(BestResponseReport {
        x_prime,
        delta,
        utility_gain: gain,
        solver: SolverTag::ClosedForm,
        iterations: 1,
        diagnostics: None,
    })
}

/// Options of the numeric solver.
#[derive(Debug, Clone, Copy)]
pub struct NumericSolveOptions {
    pub budget: usize,
    /// Per-iteration cap on the step length; bounds the norm-exponent case
    /// where the utility can be unbounded above.
    pub step_cap: f64,
}

impl Default for NumericSolveOptions {
    fn default() -> Self {
        NumericSolveOptions {
            budget: 200,
            step_cap: 1.0,
        }
    }
}

const GRAD_TOL: f64 = 1e-8;
const MIN_BACKTRACK: f64 = 1e-12;

/// Gradient ascent on U(x') = f(x') − λ·c(x,x') from x, with backtracking
/// line search halving from step 1.0. Returns the best iterate seen; the
/// result never has utility below U(x). A non-finite score along the path
/// aborts with the last finite iterate and a diagnostics flag.
pub fn best_response_numeric<T: Scalar>(
    x: &Vector<T>,
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    budget: usize,
) -> Result<BestResponseReport<T>, ResponseError> {
    numeric_masked(
        x,
        f,
        cost,
        &full_index_set(x.len()),
        NumericSolveOptions {
            budget,
            ..NumericSolveOptions::default()
        },
    )
}

pub(crate) fn numeric_masked<T: Scalar>(
    x: &Vector<T>,
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    idx: &[usize],
    options: NumericSolveOptions,
) -> Result<BestResponseReport<T>, ResponseError> {
    cost.validate()?;
    if options.budget < 1 {
        return Err(ResponseError::InvalidHyperparameter(
            "numeric budget must be >= 1".into(),
        ));
    }
    if idx.is_empty() {
        return Ok(BestResponseReport::at_origin(x, SolverTag::Numeric));
    }

    let step_cap = lit::<T>(options.step_cap);
    let grad_tol = lit::<T>(GRAD_TOL);
    let u0 = f.score(x);
    let mut current = x.clone();
    let mut current_u = u0;
    let mut best = x.clone();
    let mut best_u = u0;
    let mut diagnostics = None;
    let mut iterations = 0usize;

    'outer: for _ in 0..options.budget {
        iterations += 1;
        let grad_u = utility_gradient(f, cost, x, &current, idx);
        let gnorm = grad_u.norm();
        if !gnorm.is_finite() {
            diagnostics = Some("non-finite utility gradient".into());
            break;
        }
        if gnorm < grad_tol {
            break;
        }
        let mut step = T::one();
        loop {
            // clip the move to the step cap
            let raw_len = step * gnorm;
            let factor = if raw_len > step_cap {
                step_cap / gnorm
            } else {
                step
            };
            let mut candidate = current.clone();
            candidate.axpy_inplace(factor, &grad_u);
            let cand_score = f.score(&candidate);
            if !cand_score.is_finite() {
                diagnostics = Some("non-finite score along ascent path".into());
                break 'outer;
            }
            let cand_u = cand_score - cost.lambda * cost.cost_on(x, &candidate, idx);
            // Armijo sufficient increase; plain improvement alone lets the
            // iterate oscillate around the maximizer
            let required = current_u + lit::<T>(0.5) * factor * gnorm * gnorm;
            if cand_u >= required && cand_u > current_u {
                current = candidate;
                current_u = cand_u;
                if cand_u > best_u {
                    best = current.clone();
                    best_u = cand_u;
                }
                break;
            }
            step *= lit::<T>(0.5);
            if step < lit::<T>(MIN_BACKTRACK) {
                break 'outer;
            }
        }
    }

    let delta = best.sub(x);
    Ok(BestResponseReport {
        x_prime: best,
        delta,
        utility_gain: best_u - u0,
        solver: SolverTag::Numeric,
        iterations,
        diagnostics,
    })
}

/// ∇_{x'} U restricted to the manipulable coordinates (zero elsewhere).
fn utility_gradient<T: Scalar>(
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    x: &Vector<T>,
    x_prime: &Vector<T>,
    idx: &[usize],
) -> Vector<T> {
    let grad_f = f.gradient(x_prime);
    let delta_sub: Vec<T> = idx.iter().map(|&j| x_prime[j] - x[j]).collect();
    let m_sub = cost.matrix_on(idx);
    let m_delta = m_sub.matvec(&Vector::from_vec(delta_sub.clone()));
    let mut out = Vector::zeros(x.len());
    match cost.exponent {
        CostExponent::Quadratic => {
            let two = lit::<T>(2.0);
            for (a, &j) in idx.iter().enumerate() {
                out[j] = grad_f[j] - cost.lambda * two * m_delta[a];
            }
        }
        CostExponent::Norm => {
            let q: T = delta_sub
                .iter()
                .zip(m_delta.as_slice())
                .map(|(&d, &md)| d * md)
                .sum();
            let norm = q.max(T::zero()).sqrt();
            if norm > lit::<T>(1e-15) {
                for (a, &j) in idx.iter().enumerate() {
                    out[j] = grad_f[j] - cost.lambda * m_delta[a] / norm;
                }
            } else {
                // subgradient choice at the kink: pure score ascent
                for &j in idx {
                    out[j] = grad_f[j];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Matrix, RngStream};

    fn linear(w: Vec<f64>, b: f64) -> ScoreFunction<f64> {
        ScoreFunction::Linear {
            w: Vector::from_vec(w),
            b,
        }
    }

    #[test]
    fn flat_score_stays_put() {
        let f = linear(vec![0.0, 0.0], 1.0);
        let cost = CostModel::euclidean_quadratic(1.0);
        let x = Vector::from_vec(vec![3.0, -2.0]);
        let report = best_response_closed_form(&x, &f, &cost).unwrap();
        assert_eq!(report.x_prime, x);
        assert_eq!(report.delta.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn closed_form_euclidean_example() {
        let f = linear(vec![2.0, 0.0], 0.0);
        let cost = CostModel::euclidean_quadratic(1.0);
        let x = Vector::from_vec(vec![0.0, 0.0]);
        let report = best_response_closed_form(&x, &f, &cost).unwrap();
        assert!((report.x_prime[0] - 1.0).abs() < 1e-14);
        assert!(report.x_prime[1].abs() < 1e-14);
        assert!(report.utility_gain >= 0.0);
    }

    #[test]
    fn closed_form_diagonal_mahalanobis_example() {
        let f = linear(vec![1.0, 1.0], 0.0);
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]);
        let cost = CostModel::mahalanobis_quadratic(m, 0.5);
        let x = Vector::from_vec(vec![0.0, 0.0]);
        let report = best_response_closed_form(&x, &f, &cost).unwrap();
        assert!((report.delta[0] - 1.0).abs() < 1e-12);
        assert!((report.delta[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn norm_exponent_rejected_by_closed_form() {
        let f = linear(vec![1.0], 0.0);
        let cost = CostModel {
            geometry: crate::response::CostGeometry::Euclidean,
            exponent: CostExponent::Norm,
            lambda: 1.0,
        };
        let x = Vector::from_vec(vec![0.0]);
        assert!(matches!(
            best_response_closed_form(&x, &f, &cost),
            Err(ResponseError::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn numeric_matches_closed_form_on_quadratic_cost() {
        let mut rng = RngStream::new(21);
        for _ in 0..20 {
            let d = 1 + rng.index(3);
            let w = Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
            let x = Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
            let f = ScoreFunction::Linear { w, b: 0.0 };
            let lambda = 0.5 + rng.uniform::<f64>();
            let cost = CostModel::euclidean_quadratic(lambda);
            let closed = best_response_closed_form(&x, &f, &cost).unwrap();
            let numeric = best_response_numeric(&x, &f, &cost, 200).unwrap();
            for j in 0..d {
                assert!(
                    (closed.x_prime[j] - numeric.x_prime[j]).abs() < 1e-6,
                    "mismatch at {j}: {} vs {}",
                    closed.x_prime[j],
                    numeric.x_prime[j]
                );
            }
        }
    }

    #[test]
    fn huge_lambda_collapses_response() {
        let f = linear(vec![1.0, 2.0], 0.0);
        let cost = CostModel::euclidean_quadratic(1e6);
        let x = Vector::from_vec(vec![0.5, -0.5]);
        let report = best_response_numeric(&x, &f, &cost, 200).unwrap();
        assert!(report.delta.norm() <= 1e-5);
    }

    #[test]
    fn saturated_sigmoid_barely_moves() {
        // |w·x| >> 1 so the finite-difference gradient is ~0
        let w = Vector::from_vec(vec![5.0, 0.0]);
        let f = ScoreFunction::SigmoidLinear { w: w.clone(), b: 0.0 };
        let x = Vector::from_vec(vec![10.0, 0.0]);
        // finite-difference oracle confirms a vanishing gradient
        let h: f64 = 1e-6;
        let mut xp = x.clone();
        xp[0] += h;
        let fd = (f.score(&xp) - f.score(&x)) / h;
        assert!(fd.abs() < 1e-8);
        let cost = CostModel::euclidean_quadratic(1.0);
        let report = best_response_numeric(&x, &f, &cost, 200).unwrap();
        assert!(report.delta.norm() < 1e-6);
    }

    #[test]
    fn numeric_never_returns_worse_utility() {
        let mut rng = RngStream::new(5);
        for _ in 0..50 {
            let w = Vector::from_vec(vec![rng.standard_normal(), rng.standard_normal()]);
            let f = ScoreFunction::SigmoidLinear { w, b: rng.standard_normal() };
            let x = Vector::from_vec(vec![rng.standard_normal(), rng.standard_normal()]);
            let cost = CostModel {
                geometry: crate::response::CostGeometry::Euclidean,
                exponent: if rng.bernoulli(0.5) {
                    CostExponent::Quadratic
                } else {
                    CostExponent::Norm
                },
                lambda: 0.2 + rng.uniform::<f64>(),
            };
            let report = best_response_numeric(&x, &f, &cost, 100).unwrap();
            assert!(report.utility_gain >= -1e-9);
        }
    }
}
