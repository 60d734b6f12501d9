//! Seeded experiment runners producing long-format result tables.
//!
//! Sweep cells are independent jobs distributed over a small worker pool;
//! all randomness per cell derives from the cell's seed, so tables are
//! reproducible bit-exactly regardless of the worker count. Timing cells
//! (the cost study) always run serially.

pub mod baseline;
pub mod cost;
pub mod stats;
pub mod sweeps;
pub mod trajectory;

pub use baseline::{BaselineConfig, BaselineFamily, FinetuneBaseline};
pub use cost::run_cost_study;
pub use trajectory::{run_trajectory, trajectory_table, TrajectoryConfig, TrajectoryScore};
pub use sweeps::{
    run_context_sweep, run_misspecification_study, run_proportion_sweep, run_regime_grid,
};

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::data::{
    generate_synthetic, ingest_csv, Dataset, IngestOptions, StrategicTestSet, SyntheticTaskSpec,
};
use crate::error::HarnessError;
use crate::numeric::{RngStream, Vector};
use crate::response::{
    estimate_cost_matrix, ManipulationConfig, ManipulationModel, Misspecification, ScoreFunction,
};
use crate::spn::Backbone;

/// Where a sweep's data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic(SyntheticTaskSpec),
    Csv {
        path: std::path::PathBuf,
        label_column: String,
        positive_label: String,
        options: IngestOptions,
    },
}

/// Sweep kinds mirroring the figure analogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Proportion,
    ContextSize,
    RegimeGrid,
    CostStudy,
    Misspecification,
    Trajectory,
}

/// Full sweep specification: kind, grid, seeds, data source, regime and
/// backbone configuration.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub source: DataSource,
    pub manipulation: ManipulationConfig,
    pub backbone_layers: usize,
    pub backbone_eta: f64,
    pub context_size: usize,
    pub jobs: usize,
    /// Replace the estimated Mahalanobis matrix by the identity (isotropic
    /// cost experiments).
    pub identity_cost_matrix: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.grid.is_empty() {
            return Err(HarnessError::InvalidSpec("empty grid".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &s in &self.seeds {
            if !seen.insert(s) {
                return Err(HarnessError::InvalidSpec(format!("duplicate seed {s}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidSpec("empty seed list".into()));
        }
        if self.backbone_layers == 0 {
            return Err(HarnessError::InvalidSpec("backbone needs >= 1 layer".into()));
        }
        Ok(())
    }

    pub fn backbone(&self) -> Backbone<f64> {
        Backbone::new(self.backbone_layers, self.backbone_eta)
    }
}

/// Canonical synthetic linear task used by the figure analogs.
pub fn canonical_task() -> SyntheticTaskSpec {
    SyntheticTaskSpec {
        dim: 5,
        separation: 6.0,
        covariance_seed: 7,
        context_per_class: 100,
        test_per_class: 150,
        family: crate::data::ScoreFamily::Linear,
    }
}

/// Canonical sweep defaults: 20 seeds, K = 50, 50-layer backbone.
pub fn canonical_spec(kind: SweepKind, grid: Vec<f64>) -> SweepSpec {
    SweepSpec {
        kind,
        grid,
        seeds: (0..20).collect(),
        source: DataSource::Synthetic(canonical_task()),
        manipulation: ManipulationConfig::default(),
        backbone_layers: 50,
        backbone_eta: 0.3,
        context_size: 50,
        jobs: 1,
        identity_cost_matrix: false,
    }
}

/// One long-format result row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_id: String,
    pub method: String,
    pub regime: String,
    pub grid_value: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Long-format result table with the fixed CSV schema.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    /// Values for a (method, metric) pair at a grid value, ordered by seed.
    pub fn values(&self, method: &str, metric: &str, grid_value: f64) -> Vec<f64> {
        let mut rows: Vec<&ResultRow> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric && r.grid_value == grid_value)
            .collect();
        rows.sort_by_key(|r| r.seed);
        rows.iter().map(|r| r.value).collect()
    }

    pub fn values_in_regime(
        &self,
        method: &str,
        metric: &str,
        regime: &str,
        grid_value: f64,
        sweep_id: &str,
    ) -> Vec<f64> {
        let mut rows: Vec<&ResultRow> = self
            .rows
            .iter()
            .filter(|r| {
                r.method == method
                    && r.metric == metric
                    && r.regime == regime
                    && r.grid_value == grid_value
                    && r.sweep_id == sweep_id
            })
            .collect();
        rows.sort_by_key(|r| r.seed);
        rows.iter().map(|r| r.value).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sweep_id,method,regime,grid_value,seed,metric,value\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.8e},{},{},{:.8e}\n",
                r.sweep_id, r.method, r.regime, r.grid_value, r.seed, r.metric, r.value
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }
}

/// Run independent cells over a worker pool; the output order matches the
/// input order no matter how many workers run.
pub fn run_cells<C, R, F>(cells: Vec<C>, jobs: usize, work: F) -> Vec<R>
where
    C: Send + Sync,
    R: Send,
    F: Fn(&C) -> R + Sync,
{
    if jobs <= 1 || cells.len() <= 1 {
        return cells.iter().map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<R>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let r = work(&cells[i]);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("cell completed"))
        .collect()
}

/// Confusion-matrix summary of one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalOutcome {
    pub accuracy: f64,
    /// Fraction of true negatives classified positive.
    pub fp_error: f64,
    /// Fraction of true positives classified negative.
    pub fn_error: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl EvalOutcome {
    pub fn from_predictions(classes: &[i8], labels: &[i8]) -> EvalOutcome {
        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for (&c, &l) in classes.iter().zip(labels.iter()) {
            match (c, l) {
                (1, 1) => tp += 1,
                (1, -1) => fp += 1,
                (-1, -1) => tn += 1,
                (-1, 1) => fn_ += 1,
                _ => unreachable!("labels validated at construction"),
            }
        }
        let n = classes.len();
        let negs = fp + tn;
        let poss = tp + fn_;
        EvalOutcome {
            accuracy: (tp + tn) as f64 / n as f64,
            fp_error: if negs > 0 { fp as f64 / negs as f64 } else { 0.0 },
            fn_error: if poss > 0 { fn_ as f64 / poss as f64 } else { 0.0 },
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Per-seed task bundle shared by all sweep kinds: dataset, deployed score
/// rule, cost matrix.
pub(crate) struct SeedTask {
    pub ctx: Dataset<f64>,
    pub test: Dataset<f64>,
    pub ctx_labels: Vector<f64>,
    pub deployed: ScoreFunction<f64>,
    pub cost_matrix: crate::numeric::Matrix<f64>,
}

pub(crate) const DATA_LABEL: u64 = 0x44415441; // "DATA"
pub(crate) const TEST_LABEL: u64 = 0x54455354; // "TEST"
pub(crate) const CTX_LABEL: u64 = 0x435458; // "CTX"

pub(crate) fn load_seed_task_for(
    spec: &SweepSpec,
    backbone: &Backbone<f64>,
    seed: u64,
) -> Result<SeedTask, HarnessError> {
    let mut task = load_seed_task(&spec.source, backbone, seed)?;
    if spec.identity_cost_matrix {
        task.cost_matrix = crate::numeric::Matrix::identity(task.ctx.dim());
    }
    Ok(task)
}

pub(crate) fn load_seed_task(
    source: &DataSource,
    backbone: &Backbone<f64>,
    seed: u64,
) -> Result<SeedTask, HarnessError> {
    let root = RngStream::new(seed);
    let ds: Dataset<f64> = match source {
        DataSource::Synthetic(spec) => {
            let mut rng = root.child(DATA_LABEL);
            generate_synthetic(spec, &mut rng)?
        }
        DataSource::Csv {
            path,
            label_column,
            positive_label,
            options,
        } => {
            let opts = IngestOptions {
                split_seed: seed,
                ..options.clone()
            };
            ingest_csv(path, label_column, positive_label, &opts)?
        }
    };
    let ctx = ds.context_view();
    let test = ds.test_view();
    let ctx_labels = Vector::from_vec((0..ctx.n()).map(|i| ctx.label_value(i)).collect());
    let deployed = backbone.score_function(ctx.features(), &ctx_labels).map_err(|e| {
        HarnessError::InvalidSpec(format!("backbone readout failed: {e}"))
    })?;
    let eps = crate::numeric::default_shrinkage(&crate::numeric::sample_covariance(
        ctx.features(),
    ))
    .max(1e-9);
    let (cost_matrix, _) = estimate_cost_matrix(&ctx, eps)?;
    Ok(SeedTask {
        ctx,
        test,
        ctx_labels,
        deployed,
        cost_matrix,
    })
}

/// Instantiate the manipulation model for a named regime using the task's
/// estimated cost matrix.
pub(crate) fn regime_model(
    regime: &str,
    base: &ManipulationConfig,
    task: &SeedTask,
) -> Result<ManipulationModel<f64>, HarnessError> {
    let mut cfg = base.clone();
    cfg.mis_variant = "none".into();
    match regime {
        "mahalanobis" => {
            cfg.regime = "standard".into();
            cfg.geometry = "mahalanobis".into();
        }
        "euclidean" => {
            cfg.regime = "standard".into();
            cfg.geometry = "euclidean".into();
        }
        "noisy" => {
            cfg.regime = "noisy".into();
            cfg.geometry = "mahalanobis".into();
        }
        "heterogeneous" => {
            cfg.regime = "heterogeneous".into();
            cfg.geometry = "mahalanobis".into();
        }
        other => {
            return Err(HarnessError::InvalidSpec(format!(
                "unknown regime: {other}"
            )))
        }
    }
    let matrix = if cfg.geometry == "mahalanobis" {
        Some(task.cost_matrix.clone())
    } else {
        None
    };
    Ok(cfg.instantiate(matrix)?)
}

/// Misspecified variant of the standard Mahalanobis model.
pub(crate) fn misspec_model(
    variant: &str,
    base: &ManipulationConfig,
    task: &SeedTask,
) -> Result<ManipulationModel<f64>, HarnessError> {
    let mut model = regime_model("mahalanobis", base, task)?;
    model.misspec = match variant {
        "default" => Misspecification::None,
        "inaccurate" => Misspecification::Inaccurate {
            sigma: base.mis_sigma,
        },
        "incomplete" => Misspecification::Incomplete {
            density: base.mask_density,
            mask_seed: if base.mask_seed == 0 {
                None
            } else {
                Some(base.mask_seed)
            },
        },
        "approximate" => Misspecification::Approximate,
        other => {
            return Err(HarnessError::InvalidSpec(format!(
                "unknown misspecification variant: {other}"
            )))
        }
    };
    Ok(model)
}

/// Evaluate the plain-context backbone on a strategic test set.
pub(crate) fn evaluate_base(
    backbone: &Backbone<f64>,
    task: &SeedTask,
    test_set: &StrategicTestSet<f64>,
) -> Result<EvalOutcome, HarnessError> {
    let scores = backbone
        .predict_batch(task.ctx.features(), &task.ctx_labels, &test_set.features)
        .map_err(HarnessError::Spn)?;
    let classes: Vec<i8> = scores.iter().map(|&s| crate::spn::classify(s)).collect();
    Ok(EvalOutcome::from_predictions(&classes, test_set.base.labels()))
}
