//! Update-cost study: cumulative wall-clock and data costs of repeated
//! finetuning versus in-context adaptation across manipulation-frequency
//! levels. Levels run serially; only ordinal timing claims are meaningful.

use std::time::Instant;

use crate::data::{apply_manipulation, Dataset};
use crate::error::HarnessError;
use crate::numeric::{Matrix, RngStream, Vector};
use crate::response::ScoreFunction;
use crate::spn::{build_strategic_context, spn_batch_predict, SpnPredictor};

use super::baseline::{BaselineConfig, FinetuneBaseline};
use super::stats::median;
use super::{load_seed_task_for, regime_model, ResultRow, ResultTable, SweepSpec, TEST_LABEL};

const TIMING_REPS: usize = 5;

fn timed<F: FnMut()>(mut work: F) -> f64 {
    let mut samples = Vec::with_capacity(TIMING_REPS);
    for _ in 0..TIMING_REPS {
        let start = Instant::now();
        work();
        samples.push(start.elapsed().as_secs_f64());
    }
    median(&samples)
}

fn append_rows(features: &Matrix<f64>, extra: &[(Vector<f64>, i8)]) -> (Matrix<f64>, Vec<i8>) {
    let d = features.cols();
    let total = features.rows() + extra.len();
    let mut out = Matrix::zeros(total, d);
    for i in 0..features.rows() {
        for j in 0..d {
            out[(i, j)] = features[(i, j)];
        }
    }
    for (k, (x, _)) in extra.iter().enumerate() {
        for j in 0..d {
            out[(features.rows() + k, j)] = x[j];
        }
    }
    (out, extra.iter().map(|(_, l)| *l).collect())
}

/// Per frequency level L: run L sequential manipulation rounds. The
/// finetune arm retrains on the growing augmented set each round and pays
/// one fresh batch of manipulated samples per round (cumulative data cost
/// L·n_manip). The in-context arm rebuilds its strategic context and runs
/// a forward pass, consuming a fixed 2K context entries per cycle.
pub fn run_cost_study(spec: &SweepSpec) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    let levels: Vec<usize> = spec.grid.iter().map(|&g| g as usize).collect();
    if levels.iter().any(|&l| l < 1) {
        return Err(HarnessError::InvalidSpec("levels must be >= 1".into()));
    }
    let seed = spec.seeds[0];
    let backbone = spec.backbone();
    let task = load_seed_task_for(spec, &backbone, seed)?;
    let k = spec.context_size;
    let baseline_config = BaselineConfig::default();

    let mut table = ResultTable::default();
    for &level in &levels {
        // ---- finetune arm: L rounds of manipulate -> retrain ----
        let mut finetune_time = 0.0;
        let mut augmented: Vec<(Vector<f64>, i8)> = Vec::new();
        let mut current = FinetuneBaseline::fit(
            task.ctx.features(),
            task.ctx.labels(),
            &baseline_config,
        );
        let n_manip = task.ctx.n();
        for round in 0..level {
            let deployed = current
                .score_function()
                .expect("logistic baseline has a linear rule");
            let round_rng = RngStream::new(seed).child(0x4654).child(round as u64); // "FT"
            let model = regime_model("mahalanobis", &spec.manipulation, &task)?;
            let manipulated = collect_manipulated(&task.ctx, &model, &deployed, &round_rng)?;
            augmented.extend(manipulated);
            let (features, labels) = append_rows(
                task.ctx.features(),
                &augmented
                    .iter()
                    .map(|(x, l)| (x.clone(), *l))
                    .collect::<Vec<_>>(),
            );
            let mut all_labels = task.ctx.labels().to_vec();
            all_labels.extend(labels);
            finetune_time += timed(|| {
                current = FinetuneBaseline::fit(&features, &all_labels, &baseline_config);
            });
        }
        let finetune_data = (level * n_manip) as f64;

        // ---- in-context arm: L cycles of context rebuild + forward ----
        let mut icl_time = 0.0;
        let model = regime_model("mahalanobis", &spec.manipulation, &task)?;
        let test_set = apply_manipulation(
            &task.test,
            &model,
            &task.deployed,
            0.8,
            &RngStream::new(seed).child(TEST_LABEL),
        )?;
        for round in 0..level {
            let cycle_rng = RngStream::new(seed).child(0x49434c).child(round as u64); // "ICL"
            icl_time += timed(|| {
                let context = build_strategic_context(
                    &task.ctx,
                    &model,
                    &task.deployed,
                    k,
                    &cycle_rng,
                    false,
                )
                .expect("context construction");
                let predictor = SpnPredictor::new(backbone.clone(), context);
                let _ = spn_batch_predict(&predictor, &test_set).expect("forward pass");
            });
        }
        let icl_data_per_cycle = (2 * k) as f64;

        for (method, time_cost, data_cost) in [
            ("finetune", finetune_time, finetune_data),
            ("icl", icl_time, icl_data_per_cycle),
        ] {
            table.push(ResultRow {
                sweep_id: "cost_study".into(),
                method: method.into(),
                regime: "mahalanobis".into(),
                grid_value: level as f64,
                seed,
                metric: "time_cost".into(),
                value: time_cost,
            });
            table.push(ResultRow {
                sweep_id: "cost_study".into(),
                method: method.into(),
                regime: "mahalanobis".into(),
                grid_value: level as f64,
                seed,
                metric: "data_cost".into(),
                value: data_cost,
            });
        }
    }
    Ok(table)
}

fn collect_manipulated(
    ctx: &Dataset<f64>,
    model: &crate::response::ManipulationModel<f64>,
    deployed: &ScoreFunction<f64>,
    rng: &RngStream,
) -> Result<Vec<(Vector<f64>, i8)>, HarnessError> {
    let strategic = apply_manipulation(ctx, model, deployed, 1.0, rng)?;
    Ok((0..ctx.n())
        .map(|i| (strategic.features.row_vector(i), ctx.labels()[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{canonical_spec, DataSource, SweepKind};

    fn small_spec(levels: Vec<f64>) -> SweepSpec {
        let mut spec = canonical_spec(SweepKind::CostStudy, levels);
        spec.seeds = vec![0];
        if let DataSource::Synthetic(task) = &mut spec.source {
            task.context_per_class = 30;
            task.test_per_class = 20;
        }
        spec.backbone_layers = 20;
        spec.context_size = 15;
        spec
    }

    #[test]
    fn level_one_runs_single_cycle_and_row_contract_holds() {
        let spec = small_spec(vec![1.0, 2.0, 3.0]);
        let table = run_cost_study(&spec).unwrap();
        // levels * methods * metrics
        assert_eq!(table.rows.len(), 3 * 2 * 2);
        let ft_data: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.method == "finetune" && r.metric == "data_cost")
            .map(|r| r.value)
            .collect();
        // cumulative fresh manipulated samples: L * n_manip with n_manip=60
        assert_eq!(ft_data, vec![60.0, 120.0, 180.0]);
        let icl_data: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.method == "icl" && r.metric == "data_cost")
            .map(|r| r.value)
            .collect();
        assert_eq!(icl_data, vec![30.0, 30.0, 30.0]);
    }

    #[test]
    fn finetune_time_grows_with_level() {
        let spec = small_spec(vec![1.0, 3.0]);
        let table = run_cost_study(&spec).unwrap();
        let times: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.method == "finetune" && r.metric == "time_cost")
            .map(|r| r.value)
            .collect();
        assert!(times[1] > times[0]);
    }
}
