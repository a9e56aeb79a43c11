//! End-to-end protocol: preprocess, split, cross-validate, fit, then score
//! accuracy, N_10 skewness and fit time for each method on each split.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datamodel::{load_dataset, split, DataFormat, Dataset, Preprocessor};
use crate::error::{Error, Result};
use crate::hubness::{NkStats, HUBNESS_K};
use crate::knn::{Dissimilarity, KnnModel};
use crate::modelselect::{grid_search, CvConfig};
use crate::synthetic::GaussianMixture;
use crate::targets::select_targets_for;
use crate::transform::{objective, Direction, RidgeSystem, SolverMode, TransformModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Euclidean,
    MoveLabeled,
    MoveQuery,
}

impl Method {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Method::Euclidean => None,
            Method::MoveLabeled => Some(Direction::MoveLabeled),
            Method::MoveQuery => Some(Direction::MoveQuery),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Euclidean => "euclidean",
            Method::MoveLabeled => "move-labeled",
            Method::MoveQuery => "move-query",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Method::Euclidean),
            "move-labeled" => Ok(Method::MoveLabeled),
            "move-query" => Ok(Method::MoveQuery),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    File { path: PathBuf, format: DataFormat },
    Synthetic(GaussianMixture),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::File { path, format } => load_dataset(path, *format),
            DatasetSource::Synthetic(mix) => mix.generate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Preprocessing {
    pub center: bool,
    pub zscore: bool,
    pub pca_dim: Option<usize>,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Preprocessing {
            center: true,
            zscore: false,
            pca_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub lambda_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub n_folds: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        let d = CvConfig::default();
        CvSettings {
            lambda_grid: d.lambda_grid,
            k_grid: d.k_grid,
            n_folds: d.n_folds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub preprocessing: Preprocessing,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_splits")]
    pub n_splits: usize,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    /// Split `i` uses seed `seed + i`, for both the partition and its CV folds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cv: CvSettings,
    #[serde(default = "default_k_targets")]
    pub k_targets: usize,
    #[serde(default)]
    pub solver: SolverMode,
    #[serde(default = "default_hubness_k")]
    pub hubness_k: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Euclidean, Method::MoveLabeled, Method::MoveQuery]
}
fn default_splits() -> usize {
    4
}
fn default_fraction() -> f64 {
    0.7
}
fn default_k_targets() -> usize {
    1
}
fn default_hubness_k() -> usize {
    HUBNESS_K
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        ExperimentConfig {
            dataset,
            preprocessing: Preprocessing::default(),
            methods: default_methods(),
            n_splits: default_splits(),
            train_fraction: default_fraction(),
            seed: 0,
            cv: CvSettings::default(),
            k_targets: default_k_targets(),
            solver: SolverMode::default(),
            hubness_k: default_hubness_k(),
            out_dir: None,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::InvalidArgument("n_splits must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if let Some(r) = self.preprocessing.pca_dim {
            if r > dim {
                return Err(Error::InvalidArgument(format!("pca_dim {r} exceeds dimension {dim}")));
            }
        }
        Ok(())
    }
}

/// Paper-form versus exact-minimizer fits of the same move-labeled problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverComparison {
    pub paper_objective: f64,
    pub exact_objective: f64,
    /// `||W_paper - W_exact||_F / ||W_exact||_F`
    pub relative_w_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: Method,
    pub split: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub skewness: Option<f64>,
    pub train_seconds: Option<f64>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub cv_accuracy: Option<f64>,
    pub solver_comparison: Option<SolverComparison>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub skewness_mean: Option<f64>,
    pub skewness_sd: Option<f64>,
    pub train_seconds_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub dataset: String,
    pub n_objects: usize,
    pub dim: usize,
    pub class_count: usize,
    pub config: ExperimentConfig,
    pub rows: Vec<RunRow>,
    pub summary: Vec<MethodSummary>,
}

/// JSON keys holding wall-clock measurements; everything else in a report is
/// a deterministic function of the config.
pub const TIMING_FIELDS: &[&str] = &["train_seconds", "train_seconds_mean"];

impl ExperimentReport {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from("method,split,seed,accuracy,skewness,train_seconds,lambda,k,error\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.method.name(),
                r.split,
                r.seed,
                opt(r.accuracy),
                opt(r.skewness),
                opt(r.train_seconds),
                opt(r.lambda),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    /// Aligned plain-text table of per-method aggregates.
    pub fn table(&self) -> String {
        let mut out = format!(
            "dataset {} ({} objects, {} dims, {} classes), {} split(s)\n",
            self.dataset, self.n_objects, self.dim, self.class_count, self.config.n_splits
        );
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>17} {:>17} {:>12}",
            "method", "runs", "accuracy [%]", "N10 skewness", "train [s]"
        );
        for s in &self.summary {
            let skew = match (s.skewness_mean, s.skewness_sd) {
                (Some(m), Some(sd)) => format!("{m:.2} ± {sd:.2}"),
                _ => "-".into(),
            };
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>17} {:>17} {:>12.4}",
                s.method.name(),
                s.runs,
                format!("{:.1} ± {:.1}", 100.0 * s.accuracy_mean, 100.0 * s.accuracy_sd),
                skew,
                s.train_seconds_mean
            );
        }
        let _ = writeln!(
            out,
            "cv: lambda grid {:?}, k grid {:?}, {} folds; k_targets {}, solver {}",
            self.config.cv.lambda_grid, self.config.cv.k_grid, self.config.cv.n_folds, self.config.k_targets, self.config.solver
        );
        for r in self.rows.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(out, "error: {} split {}: {}", r.method.name(), r.split, r.error.as_deref().unwrap_or(""));
        }
        out
    }

    /// Writes `report.json`, `report.txt` and `runs.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("report.txt"), self.table())?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        Ok(())
    }
}

/// A fitted classifier plus the transform behind it, if any.
pub struct FittedMethod {
    pub transform: Option<TransformModel>,
    pub knn: KnnModel,
    pub train_seconds: f64,
}

/// Target selection and the closed-form fit, timed together; `k` is the
/// classification neighbor count.
pub fn fit_method(
    method: Method,
    train_x: &DMatrix<f64>,
    train_y: &[usize],
    lambda: f64,
    k: usize,
    k_targets: usize,
    solver: SolverMode,
) -> Result<FittedMethod> {
    let (transform, train_seconds) = match method.direction() {
        None => (None, 0.0),
        Some(direction) => {
            let start = Instant::now();
            let targets = select_targets_for(train_x, train_y, k_targets)?;
            let system = RidgeSystem::new(train_x, &targets.indicator()?, direction, solver)?;
            let model = system.solve(lambda)?;
            (Some(model), start.elapsed().as_secs_f64())
        }
    };
    let dissimilarity = transform.as_ref().map_or_else(Dissimilarity::euclidean, Dissimilarity::from_transform);
    let knn = KnnModel::new(train_x, train_y.to_vec(), k, dissimilarity)?;
    Ok(FittedMethod {
        transform,
        knn,
        train_seconds,
    })
}

fn compare_solvers(train_x: &DMatrix<f64>, train_y: &[usize], lambda: f64, k_targets: usize) -> Result<SolverComparison> {
    let j = select_targets_for(train_x, train_y, k_targets)?.indicator()?;
    let paper = RidgeSystem::new(train_x, &j, Direction::MoveLabeled, SolverMode::PaperClosedForm)?.solve(lambda)?;
    let exact = RidgeSystem::new(train_x, &j, Direction::MoveLabeled, SolverMode::ExactMinimizer)?.solve(lambda)?;
    Ok(SolverComparison {
        paper_objective: objective(train_x, &j, paper.w(), lambda, Direction::MoveLabeled),
        exact_objective: objective(train_x, &j, exact.w(), lambda, Direction::MoveLabeled),
        relative_w_difference: (paper.w() - exact.w()).norm() / exact.w().norm(),
    })
}

struct SplitData {
    train: Dataset,
    test_x: DMatrix<f64>,
    test_y: Vec<usize>,
}

fn prepare_split(dataset: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<SplitData> {
    let sp = split(dataset, config.train_fraction, seed)?;
    let (train_x, train_y) = dataset.rows(&sp.train_indices)?;
    let (test_x, test_y) = dataset.rows(&sp.test_indices)?;
    let p = &config.preprocessing;
    // centering is redone per CV fold and before the final fit
    let pre = Preprocessor::fit(&train_x, false, p.zscore, p.pca_dim)?;
    let train_x = pre.apply(&train_x)?;
    let test_x = pre.apply(&test_x)?;
    let train = Dataset::with_class_names(dataset.name(), train_x, train_y, dataset.class_names().to_vec())?;
    Ok(SplitData { train, test_x, test_y })
}

fn run_one(method: Method, data: &SplitData, config: &ExperimentConfig, seed: u64, split_no: usize) -> Result<RunRow> {
    let cv_config = CvConfig {
        lambda_grid: if method == Method::Euclidean {
            vec![0.0]
        } else {
            config.cv.lambda_grid.clone()
        },
        k_grid: config.cv.k_grid.clone(),
        n_folds: config.cv.n_folds,
        seed,
        direction: method.direction(),
        k_targets: config.k_targets,
        solver: config.solver,
        center: config.preprocessing.center,
    };
    let all: Vec<usize> = (0..data.train.len()).collect();
    let cv = grid_search(&data.train, &all, &cv_config).map_err(|e| e.context("cross-validation"))?;

    let (mut train_x, train_y) = (data.train.features().clone(), data.train.labels().to_vec());
    let mut test_x = data.test_x.clone();
    if config.preprocessing.center {
        let c = crate::datamodel::Centering::fit(&train_x);
        train_x = c.apply(&train_x)?;
        test_x = c.apply(&test_x)?;
    }
    let fitted = fit_method(method, &train_x, &train_y, cv.best_lambda, cv.best_k, config.k_targets, config.solver)?;
    let accuracy = if test_x.nrows() > 0 {
        Some(fitted.knn.evaluate(&test_x, &data.test_y)?)
    } else {
        None
    };
    let skewness = if test_x.nrows() > 0 && config.hubness_k <= train_x.nrows() {
        NkStats::compute(&fitted.knn, &test_x, config.hubness_k)?.skewness
    } else {
        None
    };
    let solver_comparison = match method {
        Method::MoveLabeled => Some(compare_solvers(&train_x, &train_y, cv.best_lambda, config.k_targets)?),
        _ => None,
    };
    Ok(RunRow {
        method,
        split: split_no,
        seed,
        accuracy,
        skewness,
        train_seconds: Some(fitted.train_seconds),
        lambda: method.direction().map(|_| cv.best_lambda),
        k: Some(cv.best_k),
        cv_accuracy: Some(cv.best_accuracy),
        solver_comparison,
        error: None,
    })
}

fn failed_row(method: Method, split: usize, seed: u64, err: &Error) -> RunRow {
    RunRow {
        method,
        split,
        seed,
        accuracy: None,
        skewness: None,
        train_seconds: None,
        lambda: None,
        k: None,
        cv_accuracy: None,
        solver_comparison: None,
        error: Some(err.to_string()),
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn summarize(methods: &[Method], rows: &[RunRow]) -> Vec<MethodSummary> {
    methods
        .iter()
        .filter_map(|&m| {
            let ok: Vec<&RunRow> = rows.iter().filter(|r| r.method == m && r.error.is_none()).collect();
            let acc: Vec<f64> = ok.iter().filter_map(|r| r.accuracy).collect();
            if acc.is_empty() {
                return None;
            }
            let (accuracy_mean, accuracy_sd) = mean_sd(&acc);
            let skew: Vec<f64> = ok.iter().filter_map(|r| r.skewness).collect();
            let (skewness_mean, skewness_sd) = if skew.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_sd(&skew);
                (Some(m), Some(s))
            };
            let secs: Vec<f64> = ok.iter().filter_map(|r| r.train_seconds).collect();
            Some(MethodSummary {
                method: m,
                runs: ok.len(),
                accuracy_mean,
                accuracy_sd,
                skewness_mean,
                skewness_sd,
                train_seconds_mean: mean_sd(&secs).0,
            })
        })
        .collect()
}

/// Runs every method on every split. A failing (method, split) is recorded as
/// an error row and the remaining runs continue. Report files are written
/// when `config.out_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let dataset = config.dataset.load().map_err(|e| e.context("loading dataset"))?;
    run_experiment_on(&dataset, config)
}

pub fn run_experiment_on(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate(dataset.dim())?;
    let mut rows = Vec::with_capacity(config.n_splits * config.methods.len());
    for split_no in 0..config.n_splits {
        let seed = config.seed.wrapping_add(split_no as u64);
        match prepare_split(dataset, config, seed) {
            Ok(data) => {
                for &method in &config.methods {
                    let row = run_one(method, &data, config, seed, split_no).unwrap_or_else(|e| {
                        failed_row(method, split_no, seed, &e.context(format!("split {split_no}, {}", method.name())))
                    });
                    rows.push(row);
                }
            }
            Err(e) => {
                let e = e.context(format!("split {split_no}"));
                rows.extend(config.methods.iter().map(|&m| failed_row(m, split_no, seed, &e)));
            }
        }
    }
    let report = ExperimentReport {
        version: 1,
        dataset: dataset.name().to_string(),
        n_objects: dataset.len(),
        dim: dataset.dim(),
        class_count: dataset.class_count(),
        summary: summarize(&config.methods, &rows),
        config: config.clone(),
        rows,
    };
    if let Some(dir) = &config.out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

/// Parses a report and blanks its timing fields, leaving a value that must be
/// identical across reruns of the same config.
pub fn strip_timing(report_json: &str) -> Result<serde_json::Value> {
    fn walk(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                for (key, val) in map.iter_mut() {
                    if TIMING_FIELDS.contains(&key.as_str()) {
                        *val = serde_json::Value::Null;
                    } else {
                        walk(val);
                    }
                }
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(walk),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_str(report_json)?;
    walk(&mut v);
    Ok(v)
}
