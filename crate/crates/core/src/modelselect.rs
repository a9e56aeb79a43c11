//! Cross-validated choice of the ridge weight λ and the neighbor count k.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Centering, Dataset};
use crate::error::{Error, Result};
use crate::knn::{accuracy, vote, Dissimilarity, KnnModel, Neighbor};
use crate::targets::select_targets_for;
use crate::transform::{Direction, RidgeSystem, SolverMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub lambda_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
    /// `None` selects k for plain Euclidean k-NN.
    pub direction: Option<Direction>,
    pub k_targets: usize,
    pub solver: SolverMode,
    /// Center each fold on its training side before fitting.
    pub center: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            lambda_grid: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0],
            k_grid: vec![1, 3, 5, 7, 9],
            n_folds: 5,
            seed: 0,
            direction: Some(Direction::MoveLabeled),
            k_targets: 1,
            solver: SolverMode::PaperClosedForm,
            center: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda: f64,
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_k: usize,
    pub best_accuracy: f64,
    pub n_folds: usize,
    pub direction: Option<Direction>,
    pub table: Vec<CvCell>,
    /// Fold id of each training index, aligned with the input index list.
    pub folds: Vec<usize>,
}

/// Stratified fold ids for `indices`: within each class, members are shuffled
/// and dealt round-robin, continuing the rotation from class to class.
pub fn make_folds(indices: &[usize], labels: &[usize], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {n_folds}")));
    }
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for (pos, &i) in indices.iter().enumerate() {
        let y = *labels.get(i).ok_or(Error::IndexOutOfRange { index: i, len: labels.len() })?;
        if y >= by_class.len() {
            by_class.resize(y + 1, Vec::new());
        }
        by_class[y].push(pos);
    }
    if let Some((class, members)) = by_class
        .iter()
        .enumerate()
        .find(|(_, m)| !m.is_empty() && m.len() < n_folds)
    {
        return Err(Error::ClassTooSmall {
            class,
            count: members.len(),
            needed: n_folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; indices.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &pos in members.iter() {
            folds[pos] = next;
            next = (next + 1) % n_folds;
        }
    }
    Ok(folds)
}

/// Accuracy of the k-prefix vote for each k, from neighbor lists of length max(k).
fn score_prefixes(neighbors: &[Vec<Neighbor>], labels: &[usize], truth: &[usize], ks: &[usize]) -> Vec<f64> {
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    ks.iter()
        .map(|&k| {
            let pred: Vec<usize> = neighbors
                .iter()
                .map(|nb| vote(nb[..k].iter().map(|n| labels[n.index]), class_count))
                .collect();
            accuracy(&pred, truth)
        })
        .collect()
}

/// Grid search over `lambda_grid x k_grid`. Targets, centering and W are refit
/// on the training side of every fold. Best cell maximizes mean accuracy;
/// ties go to larger λ, then smaller k.
pub fn grid_search(dataset: &Dataset, train_indices: &[usize], config: &CvConfig) -> Result<CvResult> {
    if config.lambda_grid.is_empty() || config.k_grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if config.k_grid.contains(&0) {
        return Err(Error::InvalidArgument("k grid contains 0".into()));
    }
    let folds = make_folds(train_indices, dataset.labels(), config.n_folds, config.seed)?;
    let k_max = *config.k_grid.iter().max().expect("non-empty");
    let n_lambda = config.lambda_grid.len();
    let n_k = config.k_grid.len();
    // scores[fold][lambda][k]
    let mut scores = vec![vec![vec![0.0; n_k]; n_lambda]; config.n_folds];

    for (fold, fold_scores) in scores.iter_mut().enumerate() {
        let ctx = |e: Error| e.context(format!("fold {fold}"));
        let (fit_idx, val_idx): (Vec<usize>, Vec<usize>) = {
            let (a, b): (Vec<_>, Vec<_>) = train_indices.iter().zip(&folds).partition(|(_, &f)| f != fold);
            (a.into_iter().map(|(&i, _)| i).collect(), b.into_iter().map(|(&i, _)| i).collect())
        };
        let (mut fit_x, fit_y) = dataset.rows(&fit_idx)?;
        let (mut val_x, val_y) = dataset.rows(&val_idx)?;
        if config.center {
            let c = Centering::fit(&fit_x);
            fit_x = c.apply(&fit_x)?;
            val_x = c.apply(&val_x)?;
        }
        if k_max > fit_x.nrows() {
            return Err(ctx(Error::InvalidArgument(format!(
                "k = {k_max} exceeds the {} objects on the fold's training side",
                fit_x.nrows()
            ))));
        }

        match config.direction {
            None => {
                let model = KnnModel::new(&fit_x, fit_y.clone(), k_max, Dissimilarity::euclidean()).map_err(ctx)?;
                let nb = model.neighbors_batch(&val_x, k_max)?;
                let acc = score_prefixes(&nb, &fit_y, &val_y, &config.k_grid);
                for row in fold_scores.iter_mut() {
                    row.clone_from(&acc);
                }
            }
            Some(direction) => {
                let targets = select_targets_for(&fit_x, &fit_y, config.k_targets).map_err(ctx)?;
                let system = RidgeSystem::new(&fit_x, &targets.indicator()?, direction, config.solver)?;
                for (li, &lambda) in config.lambda_grid.iter().enumerate() {
                    let w = system
                        .solve(lambda)
                        .map_err(|e| ctx(e.context(format!("lambda {lambda}"))))?;
                    let model = KnnModel::new(&fit_x, fit_y.clone(), k_max, Dissimilarity::from_transform(&w))?;
                    let nb = model.neighbors_batch(&val_x, k_max)?;
                    fold_scores[li] = score_prefixes(&nb, &fit_y, &val_y, &config.k_grid);
                }
            }
        }
    }

    let mut table = Vec::with_capacity(n_lambda * n_k);
    for (li, &lambda) in config.lambda_grid.iter().enumerate() {
        for (ki, &k) in config.k_grid.iter().enumerate() {
            let accs: Vec<f64> = scores.iter().map(|f| f[li][ki]).collect();
            let m = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / m;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (m - 1.0);
            table.push(CvCell {
                lambda,
                k,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                fold_accuracy: accs,
            });
        }
    }
    let best = table
        .iter()
        .max_by(|a, b| {
            a.mean_accuracy
                .total_cmp(&b.mean_accuracy)
                .then(a.lambda.total_cmp(&b.lambda))
                .then(b.k.cmp(&a.k))
        })
        .expect("non-empty table");
    Ok(CvResult {
        best_lambda: best.lambda,
        best_k: best.k,
        best_accuracy: best.mean_accuracy,
        n_folds: config.n_folds,
        direction: config.direction,
        table,
        folds,
    })
}
