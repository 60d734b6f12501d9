//! Command-line front end: data generation, single best responses,
//! trajectory simulation, SPN evaluation, sweeps, the cost study, and the
//! theory verification batteries. Every run writes its outputs plus a
//! manifest under the --out directory.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{resolve, FileConfig};
use manifest::Manifest;

use spn_core::data::{
    apply_manipulation, export_csv, generate_synthetic, ingest_csv, Dataset, IngestOptions,
    ScoreFamily, SyntheticTaskSpec,
};
use spn_core::harness::{
    run_context_sweep, run_cost_study, run_misspecification_study, run_proportion_sweep,
    run_regime_grid, run_trajectory, trajectory_table, DataSource, SweepKind, SweepSpec,
    TrajectoryConfig, TrajectoryScore,
};
use spn_core::numeric::{Matrix, RngStream, Vector};
use spn_core::response::{
    estimate_cost_matrix, respond_with_model, ManipulationConfig, ScoreFunction,
};
use spn_core::spn::{
    build_strategic_context, spn_batch_predict, write_predictions_csv, Backbone, SpnPredictor,
};
use spn_core::theory::battery::{run_batteries, write_battery_csv, BatteryConfig};

#[derive(Parser)]
#[command(name = "spn", about = "Strategic in-context tabular prediction toolkit")]
struct Cli {
    /// Root seed; all stream derivation starts here.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker count for sweep cells (timing commands always run serially).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "spn_out")]
    out: PathBuf,
    /// Key-value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset or ingest a CSV, writing dataset.csv.
    GenData(SourceArgs),
    /// Solve one agent's best response and write best_response.csv.
    BestResponse(BestResponseArgs),
    /// Coupled gradient-vs-attention manipulation trajectories.
    Trajectory(TrajectoryArgs),
    /// Evaluate base and SPN predictors on a strategic test set.
    SpnEval(SpnEvalArgs),
    /// Proportion or context-size sweep producing results.csv.
    Sweep(SweepArgs),
    /// Context-regime x test-regime transfer grid.
    RegimeGrid(SeedsArgs),
    /// Finetune-vs-ICL update cost study.
    CostStudy(CostStudyArgs),
    /// Misspecified-context robustness study.
    MisspecStudy(MisspecArgs),
    /// Randomized verification batteries over the discrete constructions.
    VerifyTheory(VerifyArgs),
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Generate a synthetic two-class Gaussian mixture task (default when
    /// --csv is absent).
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    covariance_seed: Option<u64>,
    /// Context rows per class.
    #[arg(long)]
    n_context: Option<usize>,
    /// Test rows per class.
    #[arg(long)]
    n_test: Option<usize>,
    /// Ingest this CSV instead of generating data.
    #[arg(long, requires = "label_column", requires = "positive_label")]
    csv: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    max_rows: Option<usize>,
    #[arg(long)]
    context_fraction: Option<f64>,
}

#[derive(Args, Clone)]
struct ResponseArgs {
    /// standard | noisy | heterogeneous
    #[arg(long)]
    regime: Option<String>,
    /// mahalanobis | euclidean
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    /// none | inaccurate | incomplete | approximate
    #[arg(long)]
    mis_variant: Option<String>,
    #[arg(long)]
    mis_sigma: Option<f64>,
    #[arg(long)]
    mask_density: Option<f64>,
    #[arg(long)]
    mask_seed: Option<u64>,
}

#[derive(Args, Clone)]
struct BackboneArgs {
    /// Attention layers (implicit descent steps).
    #[arg(long)]
    layers: Option<usize>,
    /// Step size of the constructed layers.
    #[arg(long)]
    eta: Option<f64>,
    /// Strategic context pairs.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct BestResponseArgs {
    /// Agent features, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Score weights, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    w: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    b: f64,
    /// linear | sigmoid
    #[arg(long, default_value = "linear")]
    score: String,
    /// Diagonal of the Mahalanobis matrix (euclidean when absent).
    #[arg(long)]
    m_diag: Option<String>,
    #[command(flatten)]
    response: ResponseArgs,
}

#[derive(Args)]
struct TrajectoryArgs {
    /// linear | sigmoid
    #[arg(long, default_value = "sigmoid")]
    score: String,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 500)]
    population: usize,
    #[arg(long)]
    context_points: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct SpnEvalArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    response: ResponseArgs,
    #[command(flatten)]
    backbone: BackboneArgs,
    /// Manipulated fraction of the test split.
    #[arg(long, default_value_t = 0.8)]
    proportion: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// proportion | context
    #[arg(long)]
    kind: String,
    /// Comma-separated grid values.
    #[arg(long)]
    grid: String,
    /// Number of seeds (seed list is --seed .. --seed + N).
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    response: ResponseArgs,
    #[command(flatten)]
    backbone: BackboneArgs,
}

#[derive(Args)]
struct SeedsArgs {
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    response: ResponseArgs,
    #[command(flatten)]
    backbone: BackboneArgs,
}

#[derive(Args)]
struct CostStudyArgs {
    /// Manipulation frequency levels 1..=N.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    levels: u64,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    response: ResponseArgs,
    #[command(flatten)]
    backbone: BackboneArgs,
}

#[derive(Args)]
struct MisspecArgs {
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Manipulated fraction of the test split.
    #[arg(long, default_value_t = 1.0)]
    proportion: f64,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    response: ResponseArgs,
    #[command(flatten)]
    backbone: BackboneArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Scale the batteries: N TV pairs, N/10 two-point configs, N/2
    /// pushforward constructions. Defaults to 1000/100/500.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    configs: Option<u64>,
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => FileConfig::default(),
    };
    match run(&cli, &file) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad {what} value: '{t}'")))
        })
        .collect()
}

fn source_from(args: &SourceArgs, file: &FileConfig, seed: u64) -> Result<DataSource, CliError> {
    if let Some(csv) = &args.csv {
        let label_column = args
            .label_column
            .clone()
            .or_else(|| file.get("data.label_column").map(String::from))
            .ok_or_else(|| CliError::Usage("--csv requires --label-column".into()))?;
        let positive_label = args
            .positive_label
            .clone()
            .or_else(|| file.get("data.positive_label").map(String::from))
            .ok_or_else(|| CliError::Usage("--csv requires --positive-label".into()))?;
        let options = IngestOptions {
            max_rows: args.max_rows.or(file.get_parsed("data.max_rows")?),
            context_fraction: resolve(
                args.context_fraction,
                file.get_parsed("data.context_fraction")?,
                0.5,
            ),
            split_seed: seed,
            split_column: None,
        };
        return Ok(DataSource::Csv {
            path: csv.clone(),
            label_column,
            positive_label,
            options,
        });
    }
    Ok(DataSource::Synthetic(SyntheticTaskSpec {
        dim: resolve(args.dim, file.get_parsed("data.dim")?, 5),
        separation: resolve(args.separation, file.get_parsed("data.separation")?, 6.0),
        covariance_seed: resolve(
            args.covariance_seed,
            file.get_parsed("data.covariance_seed")?,
            7,
        ),
        context_per_class: resolve(args.n_context, file.get_parsed("data.n_context")?, 100),
        test_per_class: resolve(args.n_test, file.get_parsed("data.n_test")?, 150),
        family: ScoreFamily::Linear,
    }))
}

fn manipulation_from(
    args: &ResponseArgs,
    file: &FileConfig,
) -> Result<ManipulationConfig, CliError> {
    let defaults = ManipulationConfig::default();
    Ok(ManipulationConfig {
        regime: args
            .regime
            .clone()
            .or_else(|| file.get("response.regime").map(String::from))
            .unwrap_or(defaults.regime),
        geometry: args
            .geometry
            .clone()
            .or_else(|| file.get("response.geometry").map(String::from))
            .unwrap_or(defaults.geometry),
        lambda: resolve(args.lambda, file.get_parsed("response.lambda")?, defaults.lambda),
        sigma: resolve(args.sigma, file.get_parsed("response.sigma")?, defaults.sigma),
        lambda_min: resolve(
            args.lambda_min,
            file.get_parsed("response.lambda_min")?,
            defaults.lambda_min,
        ),
        lambda_max: resolve(
            args.lambda_max,
            file.get_parsed("response.lambda_max")?,
            defaults.lambda_max,
        ),
        mis_variant: args
            .mis_variant
            .clone()
            .or_else(|| file.get("response.mis_variant").map(String::from))
            .unwrap_or(defaults.mis_variant),
        mis_sigma: resolve(
            args.mis_sigma,
            file.get_parsed("response.mis_sigma")?,
            defaults.mis_sigma,
        ),
        mask_density: resolve(
            args.mask_density,
            file.get_parsed("response.mask_density")?,
            defaults.mask_density,
        ),
        mask_seed: resolve(
            args.mask_seed,
            file.get_parsed("response.mask_seed")?,
            defaults.mask_seed,
        ),
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep_spec_from(
    kind: SweepKind,
    grid: Vec<f64>,
    seeds: u64,
    source: &SourceArgs,
    response: &ResponseArgs,
    backbone: &BackboneArgs,
    cli: &Cli,
    file: &FileConfig,
) -> Result<SweepSpec, CliError> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    Ok(SweepSpec {
        kind,
        grid,
        seeds: (cli.seed..cli.seed + seeds).collect(),
        source: source_from(source, file, cli.seed)?,
        manipulation: manipulation_from(response, file)?,
        backbone_layers: resolve(backbone.layers, file.get_parsed("backbone.layers")?, 50),
        backbone_eta: resolve(backbone.eta, file.get_parsed("backbone.eta")?, 0.3),
        context_size: resolve(backbone.k, file.get_parsed("backbone.k")?, 50),
        jobs: cli.jobs,
        identity_cost_matrix: false,
    })
}

fn record_manipulation(manifest: &mut Manifest, cfg: &ManipulationConfig) {
    for line in cfg.to_block().lines() {
        if let Some((key, value)) = line.split_once('=') {
            manifest.record(&format!("response.{}", key.trim()), value.trim());
        }
    }
}

fn record_spec(manifest: &mut Manifest, spec: &SweepSpec) {
    manifest.record(
        "sweep.grid",
        spec.grid
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.record(
        "sweep.seeds",
        format!(
            "{}..{}",
            spec.seeds.first().unwrap(),
            spec.seeds.last().unwrap() + 1
        ),
    );
    manifest.record("backbone.layers", spec.backbone_layers);
    manifest.record("backbone.eta", spec.backbone_eta);
    manifest.record("backbone.k", spec.context_size);
    match &spec.source {
        DataSource::Synthetic(task) => {
            manifest.record("data.kind", "synthetic");
            manifest.record("data.dim", task.dim);
            manifest.record("data.separation", task.separation);
            manifest.record("data.covariance_seed", task.covariance_seed);
            manifest.record("data.n_context", task.context_per_class);
            manifest.record("data.n_test", task.test_per_class);
        }
        DataSource::Csv {
            path,
            label_column,
            positive_label,
            ..
        } => {
            manifest.record("data.kind", "csv");
            manifest.record("data.path", path.display());
            manifest.record("data.label_column", label_column);
            manifest.record("data.positive_label", positive_label);
        }
    }
    record_manipulation(manifest, &spec.manipulation);
}

fn load_dataset(source: &DataSource, seed: u64) -> Result<Dataset<f64>, CliError> {
    match source {
        DataSource::Synthetic(spec) => {
            let mut rng = RngStream::new(seed).child(0x44415441);
            Ok(generate_synthetic(spec, &mut rng)?)
        }
        DataSource::Csv {
            path,
            label_column,
            positive_label,
            options,
        } => Ok(ingest_csv(path, label_column, positive_label, options)?),
    }
}

fn run(cli: &Cli, file: &FileConfig) -> Result<(), CliError> {
    ensure_out(&cli.out)?;
    match &cli.command {
        Command::GenData(args) => cmd_gen_data(cli, file, args),
        Command::BestResponse(args) => cmd_best_response(cli, file, args),
        Command::Trajectory(args) => cmd_trajectory(cli, file, args),
        Command::SpnEval(args) => cmd_spn_eval(cli, file, args),
        Command::Sweep(args) => cmd_sweep(cli, file, args),
        Command::RegimeGrid(args) => cmd_regime_grid(cli, file, args),
        Command::CostStudy(args) => cmd_cost_study(cli, file, args),
        Command::MisspecStudy(args) => cmd_misspec(cli, file, args),
        Command::VerifyTheory(args) => cmd_verify_theory(cli, file, args),
    }
}

fn cmd_gen_data(cli: &Cli, file: &FileConfig, args: &SourceArgs) -> Result<(), CliError> {
    let source = source_from(args, file, cli.seed)?;
    let ds = load_dataset(&source, cli.seed)?;
    let path = cli.out.join("dataset.csv");
    export_csv(&ds, &path, None, None)?;
    let mut manifest = Manifest::new("gen-data");
    manifest.record("seed", cli.seed);
    match &source {
        DataSource::Synthetic(task) => {
            manifest.record("data.kind", "synthetic");
            manifest.record("data.dim", task.dim);
            manifest.record("data.separation", task.separation);
            manifest.record("data.covariance_seed", task.covariance_seed);
        }
        DataSource::Csv { path, .. } => {
            manifest.record("data.kind", "csv");
            manifest.record("data.path", path.display());
            manifest.record("data.dropped_rows", ds.dropped_rows);
        }
    }
    manifest.record("rows", ds.n());
    manifest.record("columns", ds.dim());
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!("wrote {} ({} rows, {} columns)", path.display(), ds.n(), ds.dim());
    Ok(())
}

fn cmd_best_response(
    cli: &Cli,
    file: &FileConfig,
    args: &BestResponseArgs,
) -> Result<(), CliError> {
    let x = Vector::from_vec(parse_floats(&args.x, "--x")?);
    let w = Vector::from_vec(parse_floats(&args.w, "--w")?);
    if x.len() != w.len() {
        return Err(CliError::Usage(format!(
            "--x has {} entries but --w has {}",
            x.len(),
            w.len()
        )));
    }
    let f = match args.score.as_str() {
        "linear" => ScoreFunction::Linear { w, b: args.b },
        "sigmoid" => ScoreFunction::SigmoidLinear { w, b: args.b },
        other => return Err(CliError::Usage(format!("unknown score family: {other}"))),
    };
    let mut cfg = manipulation_from(&args.response, file)?;
    let matrix = match &args.m_diag {
        Some(diag) => {
            let d = parse_floats(diag, "--m-diag")?;
            if d.len() != x.len() {
                return Err(CliError::Usage("--m-diag length must match --x".into()));
            }
            cfg.geometry = "mahalanobis".into();
            let mut m = Matrix::zeros(d.len(), d.len());
            for (i, &v) in d.iter().enumerate() {
                m[(i, i)] = v;
            }
            Some(m)
        }
        None => {
            cfg.geometry = "euclidean".into();
            None
        }
    };
    let model = cfg.instantiate(matrix)?;
    let mut rng = RngStream::new(cli.seed).child(0x4147);
    let report = respond_with_model(&x, &f, &model, &mut rng, None)?;

    let path = cli.out.join("best_response.csv");
    let mut text = String::from("index,x,x_prime,delta\n");
    for j in 0..x.len() {
        text.push_str(&format!(
            "{j},{:.9e},{:.9e},{:.9e}\n",
            x[j], report.x_prime[j], report.delta[j]
        ));
    }
    std::fs::write(&path, text)?;
    let mut manifest = Manifest::new("best-response");
    manifest.record("seed", cli.seed);
    record_manipulation(&mut manifest, &cfg);
    manifest.record("utility_gain", report.utility_gain);
    manifest.record("solver", format!("{:?}", report.solver));
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!(
        "x' = [{}], utility gain {:.6}, solver {:?}",
        report
            .x_prime
            .as_slice()
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", "),
        report.utility_gain,
        report.solver
    );
    Ok(())
}

fn cmd_trajectory(cli: &Cli, file: &FileConfig, args: &TrajectoryArgs) -> Result<(), CliError> {
    let score = match args.score.as_str() {
        "linear" => TrajectoryScore::Linear,
        "sigmoid" => TrajectoryScore::Sigmoid,
        other => return Err(CliError::Usage(format!("unknown score family: {other}"))),
    };
    if args.steps < 1 || args.population < 1 {
        return Err(CliError::Usage("steps and population must be >= 1".into()));
    }
    let mut config = TrajectoryConfig::new(score, args.steps, args.population, cli.seed);
    if let Some(points) = args
        .context_points
        .or(file.get_parsed("trajectory.context_points")?)
    {
        config.context_points = points;
    }
    if let Some(lambda) = args.lambda.or(file.get_parsed("trajectory.lambda")?) {
        config.lambda = lambda;
    }
    let record = run_trajectory(&config)?;
    let table = trajectory_table(&config, &record);
    let path = cli.out.join("trajectory.csv");
    table.write_csv(&path)?;
    let mut manifest = Manifest::new("trajectory");
    manifest.record("seed", cli.seed);
    manifest.record("score", &args.score);
    manifest.record("steps", args.steps);
    manifest.record("population", args.population);
    manifest.record("context_points", config.context_points);
    manifest.record("lambda", config.lambda);
    if let Some(diag) = &record.diagnostics {
        manifest.record("diagnostics", diag);
    }
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    let final_kl = record.final_kl().unwrap_or(0.0);
    println!(
        "wrote {} ({} steps, final KL {:.6})",
        path.display(),
        record.metrics.len(),
        final_kl
    );
    Ok(())
}

fn cmd_spn_eval(cli: &Cli, file: &FileConfig, args: &SpnEvalArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.proportion) {
        return Err(CliError::Usage("--proportion must lie in [0,1]".into()));
    }
    let source = source_from(&args.source, file, cli.seed)?;
    let cfg = manipulation_from(&args.response, file)?;
    let layers = resolve(args.backbone.layers, file.get_parsed("backbone.layers")?, 50);
    let eta = resolve(args.backbone.eta, file.get_parsed("backbone.eta")?, 0.3);
    let k = resolve(args.backbone.k, file.get_parsed("backbone.k")?, 50);

    let ds = load_dataset(&source, cli.seed)?;
    let ctx = ds.context_view();
    let test = ds.test_view();
    let backbone = Backbone::new(layers, eta);
    let ctx_labels = Vector::from_vec((0..ctx.n()).map(|i| ctx.label_value(i)).collect());
    let deployed = backbone.score_function(ctx.features(), &ctx_labels)?;
    let matrix = if cfg.geometry == "mahalanobis" {
        let cov = spn_core::numeric::sample_covariance(ctx.features());
        let eps = spn_core::numeric::default_shrinkage(&cov).max(1e-9);
        Some(estimate_cost_matrix(&ctx, eps)?.0)
    } else {
        None
    };
    let model = cfg.instantiate(matrix)?;
    let test_set = apply_manipulation(
        &test,
        &model,
        &deployed,
        args.proportion,
        &RngStream::new(cli.seed).child(0x54455354),
    )?;
    let context = build_strategic_context(
        &ctx,
        &model,
        &deployed,
        k,
        &RngStream::new(cli.seed).child(0x435458),
        false,
    )?;
    let predictor = SpnPredictor::new(backbone.clone(), context);
    let predictions = spn_batch_predict(&predictor, &test_set)?;

    let base_scores = backbone.predict_batch(ctx.features(), &ctx_labels, &test_set.features)?;
    let base_hits = base_scores
        .iter()
        .zip(test.labels())
        .filter(|(s, &l)| spn_core::spn::classify(**s) == l)
        .count();
    let base_accuracy = base_hits as f64 / test.n() as f64;

    let path = cli.out.join("predictions.csv");
    write_predictions_csv(&predictions, &path)?;
    let mut manifest = Manifest::new("spn-eval");
    manifest.record("seed", cli.seed);
    manifest.record("proportion", args.proportion);
    manifest.record("backbone.layers", layers);
    manifest.record("backbone.eta", eta);
    manifest.record("backbone.k", k);
    record_manipulation(&mut manifest, &cfg);
    manifest.record("spn_accuracy", predictions.accuracy);
    manifest.record("base_accuracy", base_accuracy);
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!(
        "spn accuracy {:.4}, base accuracy {:.4} ({} test rows, {} manipulated)",
        predictions.accuracy,
        base_accuracy,
        test.n(),
        test_set.manipulated_count()
    );
    Ok(())
}

fn cmd_sweep(cli: &Cli, file: &FileConfig, args: &SweepArgs) -> Result<(), CliError> {
    let grid = parse_floats(&args.grid, "--grid")?;
    if grid.is_empty() {
        return Err(CliError::Usage("empty --grid".into()));
    }
    let (kind, name) = match args.kind.as_str() {
        "proportion" => (SweepKind::Proportion, "proportion"),
        "context" => (SweepKind::ContextSize, "context"),
        other => return Err(CliError::Usage(format!("unknown sweep kind: {other}"))),
    };
    let spec = sweep_spec_from(
        kind,
        grid,
        args.seeds,
        &args.source,
        &args.response,
        &args.backbone,
        cli,
        file,
    )?;
    let table = match kind {
        SweepKind::Proportion => run_proportion_sweep(&spec)?,
        SweepKind::ContextSize => run_context_sweep(&spec)?,
        _ => unreachable!(),
    };
    let path = cli.out.join("results.csv");
    table.write_csv(&path)?;
    let mut manifest = Manifest::new(&format!("sweep-{name}"));
    manifest.record("seed", cli.seed);
    record_spec(&mut manifest, &spec);
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn cmd_regime_grid(cli: &Cli, file: &FileConfig, args: &SeedsArgs) -> Result<(), CliError> {
    let spec = sweep_spec_from(
        SweepKind::RegimeGrid,
        vec![0.8],
        args.seeds,
        &args.source,
        &args.response,
        &args.backbone,
        cli,
        file,
    )?;
    let table = run_regime_grid(&spec)?;
    let path = cli.out.join("results.csv");
    table.write_csv(&path)?;
    let mut manifest = Manifest::new("regime-grid");
    manifest.record("seed", cli.seed);
    record_spec(&mut manifest, &spec);
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn cmd_cost_study(cli: &Cli, file: &FileConfig, args: &CostStudyArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = (1..=args.levels).map(|l| l as f64).collect();
    let mut spec = sweep_spec_from(
        SweepKind::CostStudy,
        grid,
        1,
        &args.source,
        &args.response,
        &args.backbone,
        cli,
        file,
    )?;
    spec.jobs = 1; // timing runs serially regardless of --jobs
    let table = run_cost_study(&spec)?;
    let path = cli.out.join("results.csv");
    table.write_csv(&path)?;
    let mut manifest = Manifest::new("cost-study");
    manifest.record("seed", cli.seed);
    manifest.record("levels", args.levels);
    record_spec(&mut manifest, &spec);
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn cmd_misspec(cli: &Cli, file: &FileConfig, args: &MisspecArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.proportion) {
        return Err(CliError::Usage("--proportion must lie in [0,1]".into()));
    }
    let spec = sweep_spec_from(
        SweepKind::Misspecification,
        vec![args.proportion],
        args.seeds,
        &args.source,
        &args.response,
        &args.backbone,
        cli,
        file,
    )?;
    let table = run_misspecification_study(&spec)?;
    let path = cli.out.join("results.csv");
    table.write_csv(&path)?;
    let mut manifest = Manifest::new("misspec-study");
    manifest.record("seed", cli.seed);
    record_spec(&mut manifest, &spec);
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(())
}

fn cmd_verify_theory(cli: &Cli, _file: &FileConfig, args: &VerifyArgs) -> Result<(), CliError> {
    let config = match args.configs {
        Some(n) => BatteryConfig {
            lemma_pairs: n as usize,
            lecam_pairs: ((n / 10).max(1)) as usize,
            pushforward_configs: ((n / 2).max(1)) as usize,
            seed: cli.seed,
        },
        None => BatteryConfig {
            seed: cli.seed,
            ..BatteryConfig::default()
        },
    };
    let outcome = run_batteries(&config)?;
    let path = cli.out.join("verification.csv");
    write_battery_csv(&outcome, &path)?;
    let mut manifest = Manifest::new("verify-theory");
    manifest.record("seed", cli.seed);
    manifest.record("lemma_pairs", config.lemma_pairs);
    manifest.record("lecam_pairs", config.lecam_pairs);
    manifest.record("pushforward_configs", config.pushforward_configs);
    manifest.record("all_passed", outcome.all_passed);
    manifest.record_artifact(&path);
    manifest.write(&cli.out)?;
    println!(
        "checked {} configurations, wrote {}",
        outcome.rows.len(),
        path.display()
    );
    if !outcome.all_passed {
        let failing = outcome.first_failure.as_deref().unwrap_or("unknown");
        let row = outcome
            .rows
            .iter()
            .find(|r| r.config_id == failing)
            .map(|r| format!("{r:?}"))
            .unwrap_or_default();
        return Err(CliError::Failure(format!(
            "verification failed at {failing}: {row}"
        )));
    }
    Ok(())
}
