//! Coupled manipulation trajectories: an explicit preconditioned-gradient
//! path against the attention-induced path, tracked over a population of
//! starting points with direction- and distribution-level divergences.

use crate::error::IclError;
use crate::numeric::{cosine_divergence, gaussian_kl, Cholesky, GaussianSummary, Matrix, Vector};
use crate::response::{CostModel, ScoreFunction};
use crate::scalar::{lit, Scalar};

use super::update::{icl_update, FeaturePair};

/// Per-step divergence metrics over the population.
#[derive(Debug, Clone)]
pub struct StepMetrics<T: Scalar> {
    pub step: usize,
    /// Mean cosine divergence between the two per-point updates.
    pub cosine_div_mean: T,
    /// Worst-case cosine divergence over the population.
    pub cosine_div_max: T,
    /// Mean ℓ2 distance between the two iterates.
    pub l2_div_mean: T,
    /// Gaussian KL of the attention-path population from the gradient-path
    /// population, via moment matching.
    pub kl: T,
}

/// Trajectory record: per-step iterates of both paths plus metrics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T: Scalar> {
    /// gd_iterates[t] holds the population after t steps (index 0 = start).
    pub gd_iterates: Vec<Matrix<T>>,
    pub attention_iterates: Vec<Matrix<T>>,
    pub metrics: Vec<StepMetrics<T>>,
    /// Set when a non-finite iterate truncated the simulation.
    pub diagnostics: Option<String>,
}

impl<T: Scalar> TrajectoryRecord<T> {
    pub fn final_kl(&self) -> Option<T> {
        self.metrics.last().map(|m| m.kl)
    }
}

/// Divergence between two update directions; degenerate pairs resolve to 0
/// when both vanish and to the maximum 2 when only one does.
fn direction_divergence<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> T {
    let tiny = lit::<T>(1e-15);
    let (na, nb) = (a.norm(), b.norm());
    if na < tiny && nb < tiny {
        T::zero()
    } else if na < tiny || nb < tiny {
        lit(2.0)
    } else {
        cosine_divergence(a, b).unwrap_or_else(|_| lit(2.0))
    }
}

/// Simulate T coupled steps from each starting point:
///   gradient path:   x ← x + η·M⁻¹∇f(x)
///   attention path:  x ← x + Δ_ICL(x; pairs)
pub fn simulate_trajectories<T: Scalar>(
    starts: &Matrix<T>,
    f: &ScoreFunction<T>,
    cost: &CostModel<T>,
    steps: usize,
    pairs: &[FeaturePair<T>],
    eta: T,
) -> Result<TrajectoryRecord<T>, IclError> {
    if steps < 1 {
        return Err(IclError::InvalidStep(0.0));
    }
    if pairs.is_empty() {
        return Err(IclError::EmptyContext);
    }
    let population = starts.rows();
    let d = starts.cols();
    if population == 0 {
        return Err(IclError::EmptyContext);
    }
    let idx: Vec<usize> = (0..d).collect();
    let chol = Cholesky::new(&cost.matrix_on(&idx))?;

    let mut gd = starts.clone();
    let mut att = starts.clone();
    let mut gd_iterates = vec![gd.clone()];
    let mut attention_iterates = vec![att.clone()];
    let mut metrics = Vec::with_capacity(steps);
    let mut diagnostics = None;

    'steps: for step in 1..=steps {
        let mut cos_sum = T::zero();
        let mut cos_max = T::zero();
        let mut l2_sum = T::zero();
        for i in 0..population {
            let x_gd = gd.row_vector(i);
            let grad = f.gradient(&x_gd);
            let delta_gd = chol.solve(&grad).scale(eta);

            let x_att = att.row_vector(i);
            let delta_att = icl_update(pairs, &x_att, None)?;

            let div = direction_divergence(&delta_att, &delta_gd);
            cos_sum += div;
            if div > cos_max {
                cos_max = div;
            }

            for j in 0..d {
                gd[(i, j)] = x_gd[j] + delta_gd[j];
                att[(i, j)] = x_att[j] + delta_att[j];
            }
            let next_gd = gd.row_vector(i);
            let next_att = att.row_vector(i);
            if !next_gd.all_finite() || !next_att.all_finite() {
                diagnostics = Some(format!("non-finite iterate at step {step}, point {i}"));
                break 'steps;
            }
            l2_sum += next_gd.sub(&next_att).norm();
        }
        let pop = lit::<T>(population as f64);
        let kl = population_kl(&att, &gd)?;
        gd_iterates.push(gd.clone());
        attention_iterates.push(att.clone());
        metrics.push(StepMetrics {
            step,
            cosine_div_mean: cos_sum / pop,
            cosine_div_max: cos_max,
            l2_div_mean: l2_sum / pop,
            kl,
        });
    }

    Ok(TrajectoryRecord {
        gd_iterates,
        attention_iterates,
        metrics,
        diagnostics,
    })
}

/// KL(attention population ‖ gradient population) with moment matching;
/// identical populations give exactly zero.
fn population_kl<T: Scalar>(att: &Matrix<T>, gd: &Matrix<T>) -> Result<T, IclError> {
    if att == gd {
        return Ok(T::zero());
    }
    let p = GaussianSummary::fit(att)?;
    let q = GaussianSummary::fit(gd)?;
    Ok(gaussian_kl(&p, &q)?)
}

/// Long-format export rows of a trajectory record: (step, metric, value).
pub fn trajectory_rows<T: Scalar>(record: &TrajectoryRecord<T>) -> Vec<(usize, &'static str, T)> {
    let mut rows = Vec::with_capacity(record.metrics.len() * 4);
    for m in &record.metrics {
        rows.push((m.step, "cosine_div", m.cosine_div_mean));
        rows.push((m.step, "cosine_div_max", m.cosine_div_max));
        rows.push((m.step, "l2_div", m.l2_div_mean));
        rows.push((m.step, "kl", m.kl));
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;
    use crate::response::best_response_closed_form;

    #[test]
    fn identity_context_and_flat_score_freeze_both_paths() {
        let starts = Matrix::from_rows(&[vec![0.5, -0.5], vec![1.0, 1.0], vec![0.0, 0.3]]);
        let f = ScoreFunction::Linear {
            w: Vector::from_vec(vec![0.0, 0.0]),
            b: 0.0,
        };
        let cost = CostModel::euclidean_quadratic(1.0);
        let pairs = vec![FeaturePair {
            original: Vector::from_vec(vec![0.1, 0.2]),
            manipulated: Vector::from_vec(vec![0.1, 0.2]),
        }];
        let record = simulate_trajectories(&starts, &f, &cost, 5, &pairs, 0.5).unwrap();
        assert!(record.diagnostics.is_none());
        for m in &record.metrics {
            assert_eq!(m.cosine_div_max, 0.0);
            assert_eq!(m.l2_div_mean, 0.0);
            assert_eq!(m.kl, 0.0);
        }
        assert_eq!(record.gd_iterates.last().unwrap(), &starts);
    }

    #[test]
    fn linear_score_paths_stay_parallel() {
        let mut rng = RngStream::new(81);
        let d = 3;
        let w = Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
        let f = ScoreFunction::Linear { w, b: 0.1 };
        let lambda = 0.8;
        let cost = CostModel::euclidean_quadratic(lambda);
        let pairs: Vec<FeaturePair<f64>> = (0..10)
            .map(|_| {
                let o = Vector::from_vec((0..d).map(|_| rng.standard_normal()).collect());
                let rep = best_response_closed_form(&o, &f, &cost).unwrap();
                FeaturePair {
                    original: o,
                    manipulated: rep.x_prime,
                }
            })
            .collect();
        let starts = Matrix::from_fn(40, d, |_, _| rng.standard_normal::<f64>());
        // step scale matched to the responder: η = 1/(2λ)
        let record =
            simulate_trajectories(&starts, &f, &cost, 10, &pairs, 1.0 / (2.0 * lambda)).unwrap();
        for m in &record.metrics {
            assert!(m.cosine_div_max <= 1e-8, "step {}: {}", m.step, m.cosine_div_max);
        }
    }

    #[test]
    fn non_finite_iterate_truncates_with_diagnostics() {
        // an enormous step overflows the first gradient move
        let starts = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let f = ScoreFunction::Linear {
            w: Vector::from_vec(vec![1e300, 0.0]),
            b: 0.0,
        };
        let cost = CostModel::euclidean_quadratic(1.0);
        let pairs = vec![FeaturePair {
            original: Vector::from_vec(vec![0.0, 0.0]),
            manipulated: Vector::from_vec(vec![0.1, 0.0]),
        }];
        let record = simulate_trajectories(&starts, &f, &cost, 5, &pairs, 1e300).unwrap();
        assert!(record.diagnostics.is_some());
        assert!(record.metrics.len() < 5, "record should be truncated");
    }

    #[test]
    fn long_format_rows_cover_all_steps() {
        let starts = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let f = ScoreFunction::Linear {
            w: Vector::from_vec(vec![1.0, 0.0]),
            b: 0.0,
        };
        let cost = CostModel::euclidean_quadratic(1.0);
        let pairs = vec![FeaturePair {
            original: Vector::from_vec(vec![0.0, 0.0]),
            manipulated: Vector::from_vec(vec![0.5, 0.0]),
        }];
        let record = simulate_trajectories(&starts, &f, &cost, 4, &pairs, 0.5).unwrap();
        let rows = trajectory_rows(&record);
        assert_eq!(rows.len(), 4 * 4);
    }
}
