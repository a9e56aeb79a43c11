//! Same-class nearest neighbors as regression targets, and the 0/1 pairing matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{class_sizes, row_major, Dataset};
use crate::error::{Error, Result};
use crate::knn::sq_euclidean;

/// `targets[i]` lists the training positions pulled toward object `i`,
/// nearest first. Positions index the training set, not the full dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetAssignment {
    pub k_targets: usize,
    pub targets: Vec<Vec<usize>>,
}

impl TargetAssignment {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn indicator(&self) -> Result<IndicatorMatrix> {
        indicator_matrix(self, self.targets.len())
    }
}

/// Sparse n x n 0/1 matrix stored by rows: `J[i][j] = 1` iff `j` is in `rows[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    n: usize,
    rows: Vec<Vec<usize>>,
}

impl IndicatorMatrix {
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
        }
        let mut rows = rows;
        for row in &mut rows {
            if let Some(&bad) = row.iter().find(|&&j| j >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
            row.sort_unstable();
            row.dedup();
        }
        Ok(IndicatorMatrix { n, rows })
    }

    pub fn identity(n: usize) -> Self {
        IndicatorMatrix {
            n,
            rows: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Column indices set in row `i`, ascending.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// Number of rows that select each column.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for row in &self.rows {
            for &j in row {
                c[j] += 1;
            }
        }
        c
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                rows[j].push(i);
            }
        }
        IndicatorMatrix { n: self.n, rows }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                m[(i, j)] = 1.0;
            }
        }
        m
    }
}

pub fn indicator_matrix(assignment: &TargetAssignment, n: usize) -> Result<IndicatorMatrix> {
    if assignment.targets.len() > n {
        return Err(Error::IndexOutOfRange {
            index: assignment.targets.len() - 1,
            len: n,
        });
    }
    let mut rows = assignment.targets.clone();
    rows.resize(n, Vec::new());
    IndicatorMatrix::from_rows(n, rows)
}

/// Targets for the training subset `train` of `dataset`; returned positions
/// index into `train`.
pub fn select_targets(dataset: &Dataset, train: &[usize], k_targets: usize) -> Result<TargetAssignment> {
    let (points, labels) = dataset.rows(train)?;
    select_targets_for(&points, &labels, k_targets)
}

/// For each row `i`, the `k_targets` nearest rows of the same label under the
/// Euclidean metric, ties broken by lower position. Classes smaller than
/// `k_targets + 1` contribute all their other members.
pub fn select_targets_for(points: &DMatrix<f64>, labels: &[usize], k_targets: usize) -> Result<TargetAssignment> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if k_targets == 0 {
        return Ok(TargetAssignment {
            k_targets,
            targets: vec![Vec::new(); n],
        });
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let sizes = class_sizes(labels, class_count);
    if let Some(class) = sizes.iter().position(|&s| s == 1) {
        return Err(Error::ClassTooSmall { class, count: 1, needed: 2 });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }

    let d = points.ncols();
    let flat = row_major(points);
    let row = |i: usize| &flat[i * d..(i + 1) * d];
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for class in &members {
        let m = class.len();
        if m == 0 {
            continue;
        }
        let k = k_targets.min(m - 1);
        let sub = DMatrix::from_fn(m, d, |a, c| points[(class[a], c)]);
        let norms: Vec<f64> = sub.row_iter().map(|r| r.norm_squared()).collect();
        let max_norm = norms.iter().copied().fold(0.0, f64::max);
        for start in (0..m).step_by(TARGET_BLOCK) {
            let rows = TARGET_BLOCK.min(m - start);
            // inner products against the whole class; only a prefilter, since
            // the expanded form loses exact ties
            let gram = sub.rows(start, rows) * sub.transpose();
            let block: Vec<Vec<usize>> = (0..rows)
                .into_par_iter()
                .map(|r| {
                    let a = start + r;
                    let mut approx: Vec<f64> = (0..m)
                        .filter(|&b| b != a)
                        .map(|b| norms[a] + norms[b] - 2.0 * gram[(r, b)])
                        .collect();
                    let (_, kth, _) = approx.select_nth_unstable_by(k - 1, f64::total_cmp);
                    let cutoff = *kth + 1e-9 * (norms[a] + max_norm);
                    let i = class[a];
                    let mut cand: Vec<(f64, usize)> = (0..m)
                        .filter(|&b| b != a && norms[a] + norms[b] - 2.0 * gram[(r, b)] <= cutoff)
                        .map(|b| (sq_euclidean(row(i), row(class[b])), class[b]))
                        .collect();
                    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                    cand.into_iter().take(k).map(|(_, j)| j).collect()
                })
                .collect();
            for (r, t) in block.into_iter().enumerate() {
                targets[class[start + r]] = t;
            }
        }
    }
    Ok(TargetAssignment { k_targets, targets })
}

/// Rows per inner-product block during target search.
const TARGET_BLOCK: usize = 512;
