//! Labeled datasets, file ingestion, preprocessing and train/test splitting.

mod io;
mod pca;
mod preprocess;
mod split;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use io::{load_dataset, parse_dataset, DataFormat};
pub use pca::{apply_pca, fit_pca, PcaModel};
pub use preprocess::{center, zscore, Centering, Preprocessor, Standardizer};
pub use split::{split, Split};

/// A labeled set of objects: one row of `features` per object.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from dense ids. `class_count` is inferred as `max(labels) + 1`
    /// and every id below it must occur at least once.
    pub fn new(name: impl Into<String>, features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        let class_names = (0..class_count).map(|c| c.to_string()).collect();
        Self::with_class_names(name, features, labels, class_names)
    }

    pub fn with_class_names(
        name: impl Into<String>,
        features: DMatrix<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("shape {n}x{d}, need n >= 1 and d >= 1")));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        let class_count = class_names.len();
        let mut seen = vec![false; class_count];
        for (i, &y) in labels.iter().enumerate() {
            if y >= class_count {
                return Err(Error::InvalidDataset(format!(
                    "label {y} of object {i} outside [0, {class_count})"
                )));
            }
            seen[y] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!("class {c} has no members")));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            class_count,
            class_names,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Same labels and metadata, new feature matrix (row count must match).
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        Self::with_class_names(
            self.name.clone(),
            features,
            self.labels.clone(),
            self.class_names.clone(),
        )
    }

    /// Feature rows and labels at `indices`, in the given order.
    pub fn rows(&self, indices: &[usize]) -> Result<(DMatrix<f64>, Vec<usize>)> {
        let n = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        Ok((
            select_rows(&self.features, indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        ))
    }

    /// Member count of each class.
    pub fn class_sizes(&self) -> Vec<usize> {
        class_sizes(&self.labels, self.class_count)
    }
}

pub(crate) fn class_sizes(labels: &[usize], class_count: usize) -> Vec<usize> {
    let mut sizes = vec![0; class_count];
    for &y in labels {
        sizes[y] += 1;
    }
    sizes
}

pub(crate) fn select_rows(m: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), m.ncols(), |r, c| m[(indices[r], c)])
}

/// Row-major copy of `m`.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}
