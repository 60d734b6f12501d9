//! Canonical coupled-trajectory runs: an explicit preconditioned-gradient
//! manipulation path against the attention-induced path, over a seeded
//! population of starting points.

use crate::error::HarnessError;
use crate::icl::{simulate_trajectories, trajectory_rows, FeaturePair, TrajectoryRecord};
use crate::numeric::{Matrix, RngStream, Vector};
use crate::response::{best_response_closed_form, CostModel, ScoreFunction};

use super::{ResultRow, ResultTable};

/// Score family of the trajectory study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryScore {
    Linear,
    Sigmoid,
}

/// Canonical trajectory configuration.
#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub score: TrajectoryScore,
    pub steps: usize,
    pub population: usize,
    pub context_points: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl TrajectoryConfig {
    pub fn new(score: TrajectoryScore, steps: usize, population: usize, seed: u64) -> Self {
        TrajectoryConfig {
            score,
            steps,
            population,
            context_points: 200,
            lambda: 0.5,
            seed,
        }
    }
}

/// Fixed 2-D anisotropic cost geometry of the canonical study.
fn canonical_cost(lambda: f64) -> CostModel<f64> {
    let m = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
    CostModel::mahalanobis_quadratic(m, lambda)
}

fn canonical_score(kind: TrajectoryScore) -> ScoreFunction<f64> {
    let w = Vector::from_vec(vec![2.0, -1.0]);
    match kind {
        TrajectoryScore::Linear => ScoreFunction::Linear { w, b: 0.0 },
        TrajectoryScore::Sigmoid => ScoreFunction::SigmoidLinear { w, b: 0.0 },
    }
}

/// Run the canonical coupled simulation: context pairs come from the
/// closed-form responder under the same score and cost; the gradient path
/// uses the matched step η = 1/(2λ).
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<TrajectoryRecord<f64>, HarnessError> {
    let f = canonical_score(config.score);
    let cost = canonical_cost(config.lambda);
    let root = RngStream::new(config.seed);

    let mut ctx_rng = root.child(0x5452414a); // "TRAJ"
    let mut pairs = Vec::with_capacity(config.context_points);
    for _ in 0..config.context_points {
        // context spread wider than the population so attention always has
        // nearby keys along the trajectories
        let original = Vector::from_vec(vec![
            2.0 * ctx_rng.standard_normal::<f64>(),
            2.0 * ctx_rng.standard_normal::<f64>(),
        ]);
        let report = best_response_closed_form(&original, &f, &cost)
            .map_err(HarnessError::Response)?;
        pairs.push(FeaturePair {
            original,
            manipulated: report.x_prime,
        });
    }

    let mut pop_rng = root.child(0x504f50); // "POP"
    let starts = Matrix::from_fn(config.population, 2, |_, _| pop_rng.standard_normal::<f64>());
    let eta = 1.0 / (2.0 * config.lambda);
    Ok(simulate_trajectories(
        &starts, &f, &cost, config.steps, &pairs, eta,
    )?)
}

/// Long-format rows (step, metric, value, seed) in the shared table schema.
pub fn trajectory_table(
    config: &TrajectoryConfig,
    record: &TrajectoryRecord<f64>,
) -> ResultTable {
    let regime = match config.score {
        TrajectoryScore::Linear => "linear",
        TrajectoryScore::Sigmoid => "sigmoid",
    };
    let mut table = ResultTable::default();
    for (step, metric, value) in trajectory_rows(record) {
        table.push(ResultRow {
            sweep_id: "trajectory".into(),
            method: "coupled".into(),
            regime: regime.into(),
            grid_value: step as f64,
            seed: config.seed,
            metric: metric.into(),
            value,
        });
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_trajectories_stay_parallel() {
        let config = TrajectoryConfig::new(TrajectoryScore::Linear, 10, 50, 0);
        let record = run_trajectory(&config).unwrap();
        assert!(record.diagnostics.is_none());
        for m in &record.metrics {
            assert!(m.cosine_div_max <= 1e-8, "step {}: {}", m.step, m.cosine_div_max);
        }
    }

    #[test]
    fn table_rows_cover_every_step() {
        let config = TrajectoryConfig::new(TrajectoryScore::Sigmoid, 5, 30, 1);
        let record = run_trajectory(&config).unwrap();
        let table = trajectory_table(&config, &record);
        assert_eq!(table.rows.len(), 5 * 4);
    }
}
