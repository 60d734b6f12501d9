//! Sweep runners: manipulation-proportion curves, context-size scaling,
//! the regime transfer grid, and the misspecification study.

use crate::data::{apply_manipulation, Dataset, StrategicTestSet};
use crate::error::HarnessError;
use crate::numeric::RngStream;
use crate::response::{respond_with_model, ManipulationModel, ScoreFunction};
use crate::spn::{build_strategic_context, spn_batch_predict, SpnPredictor};

use super::{
    evaluate_base, load_seed_task_for, misspec_model, regime_model, run_cells, EvalOutcome, ResultRow,
    ResultTable, SeedTask, SweepSpec, CTX_LABEL, TEST_LABEL,
};

pub(crate) const REGIMES: [&str; 4] = ["mahalanobis", "euclidean", "noisy", "heterogeneous"];
pub(crate) const FIG5_PROPORTIONS: [f64; 3] = [0.5, 0.8, 1.0];

fn spn_outcome(
    spec: &SweepSpec,
    task: &SeedTask,
    context_model: &ManipulationModel<f64>,
    k: usize,
    seed: u64,
    test_set: &StrategicTestSet<f64>,
) -> Result<EvalOutcome, HarnessError> {
    let rng = RngStream::new(seed).child(CTX_LABEL);
    let context = build_strategic_context(&task.ctx, context_model, &task.deployed, k, &rng, false)?;
    let predictor = SpnPredictor::new(spec.backbone(), context);
    let predictions = spn_batch_predict(&predictor, test_set)?;
    Ok(EvalOutcome::from_predictions(
        &predictions.classes,
        &predictions.labels,
    ))
}

/// Accuracy and false-positive error for the base surrogate and SPN as the
/// manipulation proportion sweeps the grid.
pub fn run_proportion_sweep(spec: &SweepSpec) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    if spec.grid.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(HarnessError::InvalidSpec("proportions must lie in [0,1]".into()));
    }
    let mut cells = Vec::new();
    for &p in &spec.grid {
        for &seed in &spec.seeds {
            cells.push((p, seed));
        }
    }
    let backbone = spec.backbone();
    let results = run_cells(cells, spec.jobs, |&(p, seed)| -> Result<_, HarnessError> {
        let task = load_seed_task_for(spec, &backbone, seed)?;
        let model = regime_model("mahalanobis", &spec.manipulation, &task)?;
        let test_set = apply_manipulation(
            &task.test,
            &model,
            &task.deployed,
            p,
            &RngStream::new(seed).child(TEST_LABEL),
        )?;
        let base = evaluate_base(&backbone, &task, &test_set)?;
        let spn = spn_outcome(spec, &task, &model, spec.context_size, seed, &test_set)?;
        Ok((p, seed, base, spn))
    });

    let mut table = ResultTable::default();
    for result in results {
        let (p, seed, base, spn) = result?;
        for (method, outcome) in [("base", base), ("spn", spn)] {
            for (metric, value) in [("accuracy", outcome.accuracy), ("fp_error", outcome.fp_error)]
            {
                table.push(ResultRow {
                    sweep_id: "proportion".into(),
                    method: method.into(),
                    regime: "mahalanobis".into(),
                    grid_value: p,
                    seed,
                    metric: metric.into(),
                    value,
                });
            }
        }
    }
    Ok(table)
}

/// SPN accuracy as the strategic context size K sweeps the grid, for each
/// manipulation regime and each proportion in {0.5, 0.8, 1.0}.
pub fn run_context_sweep(spec: &SweepSpec) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    let mut ks = spec.grid.clone();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if ks.windows(2).any(|w| w[0] >= w[1]) || ks.iter().any(|&k| k < 1.0) {
        return Err(HarnessError::InvalidSpec(
            "context grid must be ascending and >= 1".into(),
        ));
    }
    let mut cells = Vec::new();
    for regime in REGIMES {
        for &p in &FIG5_PROPORTIONS {
            for &k in &ks {
                for &seed in &spec.seeds {
                    cells.push((regime, p, k as usize, seed));
                }
            }
        }
    }
    let backbone = spec.backbone();
    let results = run_cells(cells, spec.jobs, |&(regime, p, k, seed)| {
        let task = load_seed_task_for(spec, &backbone, seed)?;
        if k > task.ctx.n() {
            return Err(HarnessError::InvalidSpec(format!(
                "context size {k} exceeds context rows {}",
                task.ctx.n()
            )));
        }
        let model = regime_model(regime, &spec.manipulation, &task)?;
        let test_set = apply_manipulation(
            &task.test,
            &model,
            &task.deployed,
            p,
            &RngStream::new(seed).child(TEST_LABEL),
        )?;
        let spn = spn_outcome(spec, &task, &model, k, seed, &test_set)?;
        Ok::<_, HarnessError>((regime, p, k, seed, spn))
    });

    let mut table = ResultTable::default();
    for result in results {
        let (regime, p, k, seed, spn) = result?;
        table.push(ResultRow {
            sweep_id: format!("context@p={p}"),
            method: "spn".into(),
            regime: regime.into(),
            grid_value: k as f64,
            seed,
            metric: "accuracy".into(),
            value: spn.accuracy,
        });
    }
    Ok(table)
}

/// Mixed test manipulation: exactly 20% of rows stay unmanipulated and the
/// rest split evenly across the four regimes (seeded assignment).
fn apply_mixed_manipulation(
    test: &Dataset<f64>,
    models: &[(&str, ManipulationModel<f64>)],
    f: &ScoreFunction<f64>,
    rng: &RngStream,
) -> Result<StrategicTestSet<f64>, HarnessError> {
    let n = test.n();
    let mut perm_rng = rng.child(0x4d4958); // "MIX"
    let perm = perm_rng.permutation(n);
    let untouched = n / 5; // exact 20% when 5 | n
    let remaining = n - untouched;
    let per_regime = remaining / models.len();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut cursor = untouched;
    for (m_idx, _) in models.iter().enumerate() {
        let take = if m_idx + 1 == models.len() {
            n - cursor
        } else {
            per_regime
        };
        for &row in perm.iter().skip(cursor).take(take) {
            assignment[row] = Some(m_idx);
        }
        cursor += take;
    }

    let agent_root = rng.child(0x4147); // "AG"
    let mask = test.manipulable_mask().to_vec();
    let mut features = test.features().clone();
    let mut manipulated = vec![false; n];
    for i in 0..n {
        let Some(m_idx) = assignment[i] else { continue };
        let x = test.feature_row(i);
        let mut agent_rng = agent_root.child(i as u64);
        let report = respond_with_model(&x, f, &models[m_idx].1, &mut agent_rng, Some(&mask))
            .map_err(HarnessError::Response)?;
        for j in 0..test.dim() {
            features[(i, j)] = report.x_prime[j];
        }
        manipulated[i] = true;
    }
    Ok(StrategicTestSet {
        base: test.clone(),
        features,
        manipulated,
        proportion: remaining as f64 / n as f64,
    })
}

pub(crate) const GRID_TEST_REGIMES: [&str; 5] =
    ["mahalanobis", "euclidean", "noisy", "heterogeneous", "mix"];

/// 4×5 grid: strategic contexts built under one regime, evaluated against
/// test manipulations from every regime plus the mixture, with a paired
/// base-surrogate cell. Test proportion fixed to 0.8 except for the
/// mixture, which is exactly 80% manipulated by construction.
pub fn run_regime_grid(spec: &SweepSpec) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    let mut cells = Vec::new();
    for ctx_regime in REGIMES {
        for test_regime in GRID_TEST_REGIMES {
            for &seed in &spec.seeds {
                cells.push((ctx_regime, test_regime, seed));
            }
        }
    }
    let backbone = spec.backbone();
    let results = run_cells(cells, spec.jobs, |&(ctx_regime, test_regime, seed)| {
        let task = load_seed_task_for(spec, &backbone, seed)?;
        let test_rng = RngStream::new(seed).child(TEST_LABEL);
        let test_set = if test_regime == "mix" {
            let models: Vec<(&str, ManipulationModel<f64>)> = REGIMES
                .iter()
                .map(|r| Ok((*r, regime_model(r, &spec.manipulation, &task)?)))
                .collect::<Result<_, HarnessError>>()?;
            apply_mixed_manipulation(&task.test, &models, &task.deployed, &test_rng)?
        } else {
            let model = regime_model(test_regime, &spec.manipulation, &task)?;
            apply_manipulation(&task.test, &model, &task.deployed, 0.8, &test_rng)?
        };
        let context_model = regime_model(ctx_regime, &spec.manipulation, &task)?;
        let base = evaluate_base(&backbone, &task, &test_set)?;
        let spn = spn_outcome(spec, &task, &context_model, spec.context_size, seed, &test_set)?;
        Ok::<_, HarnessError>((ctx_regime, test_regime, seed, base, spn, test_set.manipulated_count()))
    });

    let mut table = ResultTable::default();
    for result in results {
        let (ctx_regime, test_regime, seed, base, spn, manipulated) = result?;
        let regime = format!("{ctx_regime}->{test_regime}");
        for (method, outcome) in [("base", base), ("spn", spn)] {
            table.push(ResultRow {
                sweep_id: "regime_grid".into(),
                method: method.into(),
                regime: regime.clone(),
                grid_value: 0.8,
                seed,
                metric: "accuracy".into(),
                value: outcome.accuracy,
            });
        }
        table.push(ResultRow {
            sweep_id: "regime_grid".into(),
            method: "env".into(),
            regime: regime.clone(),
            grid_value: 0.8,
            seed,
            metric: "manipulated_rows".into(),
            value: manipulated as f64,
        });
    }
    Ok(table)
}

pub(crate) const MISSPEC_VARIANTS: [&str; 4] =
    ["default", "inaccurate", "incomplete", "approximate"];

/// SPN accuracy when the context is built with a misspecified response
/// model while test-time behavior stays the standard Mahalanobis response.
pub fn run_misspecification_study(spec: &SweepSpec) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    let mut cells = Vec::new();
    for variant in MISSPEC_VARIANTS {
        for &seed in &spec.seeds {
            cells.push((variant, seed));
        }
    }
    let backbone = spec.backbone();
    let p = spec.grid[0];
    if !(0.0..=1.0).contains(&p) {
        return Err(HarnessError::InvalidSpec(
            "misspecification proportion must lie in [0,1]".into(),
        ));
    }
    let results = run_cells(cells, spec.jobs, |&(variant, seed)| {
        let task = load_seed_task_for(spec, &backbone, seed)?;
        // test-time behavior fixed: standard Mahalanobis response
        let test_model = regime_model("mahalanobis", &spec.manipulation, &task)?;
        let test_set = apply_manipulation(
            &task.test,
            &test_model,
            &task.deployed,
            p,
            &RngStream::new(seed).child(TEST_LABEL),
        )?;
        let context_model = misspec_model(variant, &spec.manipulation, &task)?;
        let spn = spn_outcome(spec, &task, &context_model, spec.context_size, seed, &test_set)?;
        Ok::<_, HarnessError>((variant, seed, spn))
    });

    let mut table = ResultTable::default();
    for result in results {
        let (variant, seed, spn) = result?;
        table.push(ResultRow {
            sweep_id: "misspecification".into(),
            method: "spn".into(),
            regime: variant.into(),
            grid_value: p,
            seed,
            metric: "accuracy".into(),
            value: spn.accuracy,
        });
    }
    Ok(table)
}
