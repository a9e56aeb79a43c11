//! Command-line front end: fit, predict, hubness, cv, centrality and bench.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hubless::datamodel::{load_dataset, split, Preprocessor};
use hubless::experiment::{fit_method, run_experiment, DatasetSource, ExperimentConfig, Method};
use hubless::hubness::{hubness_csv, hubness_report};
use hubless::modelselect::{grid_search, CvConfig};
use hubless::theory::{centrality_sweep, simulate_delta, sweep_csv, CentralityExperiment};
use hubless::{DataFormat, Dataset, Dissimilarity, KnnModel, SolverMode, Split, TransformModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "hubless", version, about = "k-NN with ridge-regression transforms and hubness diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a method on a dataset (or its training split) and save it.
    Fit(FitArgs),
    /// Classify a query file with a saved model.
    Predict(PredictArgs),
    /// N_k skewness of each method on a random split.
    Hubness(HubnessArgs),
    /// Cross-validated grid search over lambda and k.
    Cv(CvArgs),
    /// Monte Carlo check of the spatial-centrality bias.
    Centrality(CentralityArgs),
    /// Full protocol: splits, CV, fit, accuracy, skewness, timing.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "dense-csv")]
    format: DataFormat,
    /// Skip mean-centering.
    #[arg(long)]
    no_center: bool,
    #[arg(long)]
    zscore: bool,
    #[arg(long)]
    pca_dim: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    /// Hold out a stratified test part; omit to train on everything.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value = "move-labeled")]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    k_targets: usize,
    #[arg(long, default_value = "paper")]
    solver: SolverMode,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_dir: PathBuf,
    /// Query file; defaults to the held-out part of the fitted dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "dense-csv")]
    format: DataFormat,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Output directory for predictions.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HubnessArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repeatable; defaults to all three methods.
    #[arg(long = "method")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    k_targets: usize,
    #[arg(long, default_value = "paper")]
    solver: SolverMode,
    #[arg(long, default_value_t = hubless::hubness::HUBNESS_K)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value = "move-labeled")]
    method: Method,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Comma-separated k grid.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    k_targets: usize,
    #[arg(long, default_value = "paper")]
    solver: SolverMode,
    /// JSON output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CentralityArgs {
    #[arg(long, value_delimiter = ',', default_value = "300")]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    s: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; JSON for a single cell, CSV for a sweep.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (JSON). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    format: Option<DataFormat>,
    #[arg(long)]
    pca_dim: Option<usize>,
    #[arg(long)]
    zscore: bool,
    #[arg(long = "method")]
    methods: Vec<Method>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_targets: Option<usize>,
    #[arg(long)]
    solver: Option<SolverMode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything `predict` needs besides the transform itself.
#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    method: Method,
    lambda: Option<f64>,
    k_targets: usize,
    solver: SolverMode,
    dataset: PathBuf,
    format: DataFormat,
    split: Option<Split>,
}

/// Preprocessed labeled objects, stored so prediction does not depend on the
/// original file.
#[derive(Serialize, Deserialize)]
struct Labeled {
    class_names: Vec<String>,
    labels: Vec<usize>,
    features: Vec<Vec<f64>>,
}

fn load(data: &DataArgs) -> Result<Dataset> {
    load_dataset(&data.dataset, data.format).with_context(|| format!("loading {}", data.dataset.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Training indices: a stratified split when a fraction is given, else all.
fn training_part(ds: &Dataset, args: &SplitArgs) -> Result<(Vec<usize>, Option<Split>)> {
    match args.train_fraction {
        Some(f) => {
            let sp = split(ds, f, args.seed)?;
            Ok((sp.train_indices.clone(), Some(sp)))
        }
        None => Ok(((0..ds.len()).collect(), None)),
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = out.write_all(b"\n");
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn fit(args: FitArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let (train, sp) = training_part(&ds, &args.split)?;
    let (x, y) = ds.rows(&train)?;
    let pre = Preprocessor::fit(&x, !args.data.no_center, args.data.zscore, args.data.pca_dim)?;
    let x = pre.apply(&x)?;
    let fitted = fit_method(args.method, &x, &y, args.lambda, 1, args.k_targets, args.solver)?;

    fs::create_dir_all(&args.out)?;
    if let Some(model) = &fitted.transform {
        fs::write(args.out.join("model.json"), model.to_json()?)?;
    }
    write_json(&args.out.join("preprocess.json"), &pre)?;
    if let Some(sp) = &sp {
        write_json(&args.out.join("split.json"), sp)?;
    }
    let manifest = Manifest {
        version: 1,
        method: args.method,
        lambda: fitted.transform.as_ref().map(|_| args.lambda),
        k_targets: args.k_targets,
        solver: args.solver,
        dataset: args.data.dataset.clone(),
        format: args.data.format,
        split: sp,
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    let labeled = Labeled {
        class_names: ds.class_names().to_vec(),
        labels: y,
        features: rows_of(&x),
    };
    write_json(&args.out.join("labeled.json"), &labeled)?;
    println!(
        "fitted {} on {} objects ({:.4}s), wrote {}",
        args.method.name(),
        labeled.labels.len(),
        fitted.train_seconds,
        args.out.display()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let dir = &args.model_dir;
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let pre: Preprocessor = read_json(&dir.join("preprocess.json"))?;
    let labeled: Labeled = read_json(&dir.join("labeled.json"))?;
    let dissimilarity = match manifest.method.direction() {
        None => Dissimilarity::euclidean(),
        Some(_) => {
            let text = fs::read_to_string(dir.join("model.json")).context("reading model.json")?;
            Dissimilarity::from_transform(&TransformModel::from_json(&text)?)
        }
    };
    let n = labeled.features.len();
    let d = labeled.features.first().map_or(0, Vec::len);
    let flat: Vec<f64> = labeled.features.concat();
    let labeled_x = DMatrix::from_row_slice(n, d, &flat);
    let knn = KnnModel::new(&labeled_x, labeled.labels.clone(), args.k, dissimilarity)?;

    let (queries, truth): (DMatrix<f64>, Vec<String>) = match &args.dataset {
        Some(path) => {
            let q = load_dataset(path, args.format).with_context(|| format!("loading {}", path.display()))?;
            let names = q.labels().iter().map(|&l| q.class_names()[l].clone()).collect();
            (q.features().clone(), names)
        }
        None => {
            let Some(sp) = &manifest.split else {
                bail!("model was fitted on the whole dataset; pass --dataset with queries");
            };
            let ds = load_dataset(&manifest.dataset, manifest.format)
                .with_context(|| format!("loading {}", manifest.dataset.display()))?;
            let (x, y) = ds.rows(&sp.test_indices)?;
            (x, y.iter().map(|&l| ds.class_names()[l].clone()).collect())
        }
    };
    let queries = pre.apply(&queries)?;
    let predicted = knn.predict(&queries)?;

    fs::create_dir_all(&args.out)?;
    let mut csv = String::from("query_index,predicted_label,true_label\n");
    let mut hits = 0;
    for (i, (&p, t)) in predicted.iter().zip(&truth).enumerate() {
        let name = &labeled.class_names[p];
        hits += usize::from(name == t);
        csv.push_str(&format!("{i},{name},{t}\n"));
    }
    fs::write(args.out.join("predictions.csv"), csv)?;
    let accuracy = hits as f64 / truth.len() as f64;
    let summary = serde_json::json!({
        "accuracy": accuracy,
        "k": args.k,
        "dissimilarity": knn.dissimilarity().name(),
        "n_queries": truth.len(),
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    println!("accuracy {:.4} over {} queries", accuracy, truth.len());
    Ok(())
}

fn hubness(args: HubnessArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let sp = split(&ds, args.train_fraction, args.seed)?;
    let (x, y) = ds.rows(&sp.train_indices)?;
    let pre = Preprocessor::fit(&x, !args.data.no_center, args.data.zscore, args.data.pca_dim)?;
    let processed = ds.with_features(pre.apply(ds.features())?)?;
    let x = pre.apply(&x)?;
    let methods = if args.methods.is_empty() {
        vec![Method::Euclidean, Method::MoveLabeled, Method::MoveQuery]
    } else {
        args.methods
    };
    let models = methods
        .iter()
        .map(|&m| {
            let f = fit_method(m, &x, &y, args.lambda, args.k, args.k_targets, args.solver)
                .with_context(|| format!("fitting {}", m.name()))?;
            Ok((m.name().to_string(), f.knn))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = hubness_report(&processed, &sp, &models, args.k)?;
    fs::create_dir_all(&args.out)?;
    let csv = hubness_csv(&rows);
    fs::write(args.out.join("hubness.csv"), &csv)?;
    write_json(&args.out.join("hubness.json"), &rows)?;
    emit(&csv);
    Ok(())
}

fn cv(args: CvArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let (train, _) = training_part(&ds, &args.split)?;
    let (x, y) = ds.rows(&train)?;
    // centering is refit inside every fold
    let pre = Preprocessor::fit(&x, false, args.data.zscore, args.data.pca_dim)?;
    let train_ds = Dataset::with_class_names(ds.name(), pre.apply(&x)?, y, ds.class_names().to_vec())?;
    let defaults = CvConfig::default();
    let config = CvConfig {
        lambda_grid: match args.method {
            Method::Euclidean => vec![0.0],
            _ => args.lambdas.unwrap_or(defaults.lambda_grid),
        },
        k_grid: args.ks.unwrap_or(defaults.k_grid),
        n_folds: args.folds,
        seed: args.split.seed,
        direction: args.method.direction(),
        k_targets: args.k_targets,
        solver: args.solver,
        center: !args.data.no_center,
    };
    let all: Vec<usize> = (0..train_ds.len()).collect();
    let result = grid_search(&train_ds, &all, &config)?;
    let json = serde_json::to_string_pretty(&result)?;
    match &args.out {
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&json),
    }
    eprintln!(
        "best lambda {} k {} (mean accuracy {:.4})",
        result.best_lambda, result.best_k, result.best_accuracy
    );
    Ok(())
}

fn centrality(args: CentralityArgs) -> Result<()> {
    let single = args.d.len() == 1 && args.s.len() == 1 && args.gamma.len() == 1;
    let text = if single {
        let exp = CentralityExperiment::new(args.d[0], args.s[0], args.gamma[0], args.n, args.seed);
        serde_json::to_string_pretty(&simulate_delta(&exp)?)?
    } else {
        sweep_csv(&centrality_sweep(&args.d, &args.s, &args.gamma, args.n, args.seed)?)
    };
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&text),
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let mut config = match (&args.config, &args.dataset) {
        (Some(path), _) => ExperimentConfig::from_json_file(path).with_context(|| format!("reading config {}", path.display()))?,
        (None, Some(path)) => ExperimentConfig::new(DatasetSource::File {
            path: path.clone(),
            format: args.format.unwrap_or(DataFormat::DenseCsv),
        }),
        (None, None) => bail!("bench needs --config or --dataset"),
    };
    if let (Some(path), Some(_)) = (&args.dataset, &args.config) {
        let format = match &config.dataset {
            DatasetSource::File { format, .. } => *format,
            DatasetSource::Synthetic(_) => DataFormat::DenseCsv,
        };
        config.dataset = DatasetSource::File {
            path: path.clone(),
            format: args.format.unwrap_or(format),
        };
    }
    if let Some(v) = args.pca_dim {
        config.preprocessing.pca_dim = Some(v);
    }
    if args.zscore {
        config.preprocessing.zscore = true;
    }
    if !args.methods.is_empty() {
        config.methods = args.methods;
    }
    if let Some(v) = args.splits {
        config.n_splits = v;
    }
    if let Some(v) = args.train_fraction {
        config.train_fraction = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.k_targets {
        config.k_targets = v;
    }
    if let Some(v) = args.solver {
        config.solver = v;
    }
    if let Some(v) = args.out {
        config.out_dir = Some(v);
    }
    let report = run_experiment(&config)?;
    emit(&report.table());
    if let Some(dir) = &config.out_dir {
        println!("wrote {}", dir.display());
    }
    if report.has_errors() {
        eprintln!("some runs failed; see the error lines above");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a).map(|_| ExitCode::SUCCESS),
        Command::Predict(a) => predict(a).map(|_| ExitCode::SUCCESS),
        Command::Hubness(a) => hubness(a).map(|_| ExitCode::SUCCESS),
        Command::Cv(a) => cv(a).map(|_| ExitCode::SUCCESS),
        Command::Centrality(a) => centrality(a).map(|_| ExitCode::SUCCESS),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
