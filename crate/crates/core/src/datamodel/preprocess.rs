use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use super::{Dataset, PcaModel};
use crate::error::{Error, Result};

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Subtracts a fixed mean vector from every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub mean: Vec<f64>,
}

impl Centering {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        Centering {
            mean: column_means(x).iter().copied().collect(),
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.mean.len(), x.ncols())?;
        let mean = RowDVector::from_row_slice(&self.mean);
        let mut out = x.clone();
        for mut row in out.row_iter_mut() {
            row -= &mean;
        }
        Ok(out)
    }
}

/// Per-column z-scoring with sample (n - 1) standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let mean = column_means(x);
        let mut sd = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let scale = col.amax();
            let var = if n > 1 {
                col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let s = var.sqrt();
            // a constant column leaves rounding noise of order eps * scale
            if !(s > 1e-12 * scale) {
                return Err(Error::ConstantColumn { column: j });
            }
            sd.push(s);
        }
        Ok(Standardizer {
            mean: mean.iter().copied().collect(),
            sd,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.mean.len(), x.ncols())?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.sd[c]
        }))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Returns the centered dataset and the subtracted mean.
pub fn center(dataset: &Dataset) -> (Dataset, DVector<f64>) {
    let c = Centering::fit(dataset.features());
    let x = c.apply(dataset.features()).expect("dimension is the dataset's own");
    let out = dataset.with_features(x).expect("centering keeps values finite");
    (out, DVector::from_vec(c.mean))
}

pub fn zscore(dataset: &Dataset) -> Result<Dataset> {
    let s = Standardizer::fit(dataset.features())?;
    dataset.with_features(s.apply(dataset.features())?)
}

/// Preprocessing fitted on one partition and replayed on others:
/// z-scoring, then PCA projection, then centering, each optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub version: u32,
    pub standardize: Option<Standardizer>,
    pub pca: Option<PcaModel>,
    pub center: Option<Centering>,
}

impl Preprocessor {
    pub fn identity() -> Self {
        Preprocessor {
            version: 1,
            standardize: None,
            pca: None,
            center: None,
        }
    }

    pub fn fit(x: &DMatrix<f64>, center: bool, zscore: bool, pca_dim: Option<usize>) -> Result<Self> {
        let mut current = x.clone();
        let standardize = if zscore {
            let s = Standardizer::fit(&current)?;
            current = s.apply(&current)?;
            Some(s)
        } else {
            None
        };
        let pca = match pca_dim {
            Some(r) => {
                let p = PcaModel::fit(&current, r)?;
                current = p.apply(&current)?;
                Some(p)
            }
            None => None,
        };
        let center = center.then(|| Centering::fit(&current));
        Ok(Preprocessor {
            version: 1,
            standardize,
            pca,
            center,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = x.clone();
        if let Some(s) = &self.standardize {
            out = s.apply(&out)?;
        }
        if let Some(p) = &self.pca {
            out = p.apply(&out)?;
        }
        if let Some(c) = &self.center {
            out = c.apply(&out)?;
        }
        Ok(out)
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        self.pca.as_ref().map_or(input_dim, |p| p.dim_out())
    }
}
