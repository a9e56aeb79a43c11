use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use super::{row_major, Dataset};
use crate::error::{Error, Result};

/// Linear projection onto the top principal directions of a training matrix.
///
/// `components` is d x r with orthonormal columns ordered by non-increasing
/// explained variance; each column's largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PcaDoc", into = "PcaDoc")]
pub struct PcaModel {
    mean: DVector<f64>,
    components: DMatrix<f64>,
    explained_variance: Vec<f64>,
}

/// Singular values (descending) and matching right singular vectors.
type Decomposition = (Vec<f64>, Vec<DVector<f64>>);

fn full_decomposition(centered: DMatrix<f64>) -> Decomposition {
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable: equal values keep decomposition order
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let values = order.iter().map(|&i| sv[i]).collect();
    let vectors = order.iter().map(|&i| v_t.row(i).transpose()).collect();
    (values, vectors)
}

/// For d much larger than n: eigenvectors of the n x n Gram matrix, lifted
/// back with `v = C^T u / sigma`. Gives up (None) when a requested component
/// is too weak for the squared spectrum to resolve it.
fn wide_decomposition(centered: &DMatrix<f64>, r: usize) -> Option<Decomposition> {
    let (n, d) = centered.shape();
    if d <= 2 * n {
        return None;
    }
    let gram = centered * centered.transpose();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) || !(eig.eigenvalues[order[r - 1]] > 1e-8 * top) {
        return None;
    }
    let picked: Vec<usize> = order[..r].to_vec();
    let u = DMatrix::from_fn(n, r, |i, k| eig.eigenvectors[(i, picked[k])]);
    let lifted = centered.tr_mul(&u);
    let values: Vec<f64> = picked.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    let vectors = (0..r).map(|k| lifted.column(k) / values[k]).collect();
    Some((values, vectors))
}

impl PcaModel {
    /// Thin SVD of the centered matrix; rows of `x` are objects.
    pub fn fit(x: &DMatrix<f64>, r: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if r == 0 || r > n.min(d) {
            return Err(Error::InvalidArgument(format!(
                "PCA dimension {r} must lie in [1, min(n, d)] = [1, {}]",
                n.min(d)
            )));
        }
        let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
        let mean_row = mean.transpose();
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean_row;
        }

        let (values, vectors) = match wide_decomposition(&centered, r) {
            Some(found) => found,
            None => full_decomposition(centered),
        };
        let denom = n.saturating_sub(1).max(1) as f64;
        let mut components = DMatrix::zeros(d, r);
        let mut explained_variance = Vec::with_capacity(r);
        for (k, (sv, mut col)) in values.into_iter().zip(vectors).take(r).enumerate() {
            let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < 0.0 {
                col.neg_mut();
            }
            components.set_column(k, &col);
            explained_variance.push(sv * sv / denom);
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn apply(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.ncols() != self.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in(),
                got: points.ncols(),
            });
        }
        let mean_row: RowDVector<f64> = self.mean.transpose();
        let mut centered = points.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean_row;
        }
        Ok(centered * &self.components)
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, projected: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = projected * self.components.transpose();
        let mean_row: RowDVector<f64> = self.mean.transpose();
        for mut row in out.row_iter_mut() {
            row += &mean_row;
        }
        out
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn dim_in(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim_out(&self) -> usize {
        self.components.ncols()
    }
}

pub fn fit_pca(dataset: &Dataset, r: usize) -> Result<PcaModel> {
    PcaModel::fit(dataset.features(), r)
}

pub fn apply_pca(model: &PcaModel, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    model.apply(points)
}

#[derive(Serialize, Deserialize)]
struct PcaDoc {
    version: u32,
    r: usize,
    mean: Vec<f64>,
    /// d rows of r entries
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
}

impl From<PcaModel> for PcaDoc {
    fn from(m: PcaModel) -> Self {
        let r = m.dim_out();
        PcaDoc {
            version: 1,
            r,
            mean: m.mean.iter().copied().collect(),
            components: row_major(&m.components).chunks(r).map(<[f64]>::to_vec).collect(),
            explained_variance: m.explained_variance,
        }
    }
}

impl TryFrom<PcaDoc> for PcaModel {
    type Error = Error;

    fn try_from(doc: PcaDoc) -> Result<Self> {
        if doc.version != 1 {
            return Err(Error::Version(doc.version));
        }
        let d = doc.mean.len();
        if doc.components.len() != d || doc.components.iter().any(|row| row.len() != doc.r) {
            return Err(Error::InvalidArgument("PCA components must be d rows of r entries".into()));
        }
        let flat: Vec<f64> = doc.components.into_iter().flatten().collect();
        Ok(PcaModel {
            mean: DVector::from_vec(doc.mean),
            components: DMatrix::from_row_slice(d, doc.r, &flat),
            explained_variance: doc.explained_variance,
        })
    }
}
