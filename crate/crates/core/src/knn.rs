//! Exact brute-force k-NN classification under pluggable dissimilarities.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::datamodel::row_major;
use crate::error::{Error, Result};
use crate::transform::{Direction, TransformModel};

/// Squared Euclidean distance with a fixed summation order.
#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for l in 0..4 {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let t = x - y;
        tail += t * t;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, PartialEq)]
pub enum DissimilarityKind {
    /// `||x - z||`
    Euclidean,
    /// `||x - W z||`: labeled objects are moved.
    TransformedLabeled(DMatrix<f64>),
    /// `||W x - z||`: queries are moved.
    TransformedQuery(DMatrix<f64>),
    /// `||L x - L z||`, for comparing externally learned Mahalanobis maps.
    BothSides(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dissimilarity {
    pub kind: DissimilarityKind,
    /// Report squared norms (ordering is the same either way).
    pub squared: bool,
}

impl Dissimilarity {
    pub fn euclidean() -> Self {
        Dissimilarity {
            kind: DissimilarityKind::Euclidean,
            squared: true,
        }
    }

    pub fn from_transform(model: &TransformModel) -> Self {
        let kind = match model.direction() {
            Direction::MoveLabeled => DissimilarityKind::TransformedLabeled(model.w().clone()),
            Direction::MoveQuery => DissimilarityKind::TransformedQuery(model.w().clone()),
        };
        Dissimilarity { kind, squared: true }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DissimilarityKind::Euclidean => "euclidean",
            DissimilarityKind::TransformedLabeled(_) => "move-labeled",
            DissimilarityKind::TransformedQuery(_) => "move-query",
            DissimilarityKind::BothSides(_) => "both-sides",
        }
    }

    /// Input dimension expected for queries and labeled points.
    fn input_dim(&self) -> Option<usize> {
        match &self.kind {
            DissimilarityKind::Euclidean => None,
            DissimilarityKind::TransformedLabeled(w) | DissimilarityKind::TransformedQuery(w) => Some(w.ncols()),
            DissimilarityKind::BothSides(l) => Some(l.ncols()),
        }
    }

    fn map_labeled(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.kind {
            DissimilarityKind::TransformedLabeled(m) | DissimilarityKind::BothSides(m) => points * m.transpose(),
            _ => points.clone(),
        }
    }

    fn map_query(&self, query: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            DissimilarityKind::TransformedQuery(m) | DissimilarityKind::BothSides(m) => Some(
                m.row_iter()
                    .map(|r| r.iter().zip(query).map(|(a, b)| a * b).sum())
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Direct evaluation of `f(x, z)` for one query and one labeled point.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        let xs = DMatrix::from_row_slice(1, z.len(), z);
        let mz = self.map_labeled(&xs);
        let mx = self.map_query(x);
        let v = sq_euclidean(mx.as_deref().unwrap_or(x), mz.as_slice());
        if self.squared {
            v
        } else {
            v.sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub index: usize,
    pub value: f64,
}

fn by_value_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.value.total_cmp(&b.value).then(a.index.cmp(&b.index))
}

/// Labeled objects ready for querying. For [`DissimilarityKind::TransformedLabeled`]
/// and [`DissimilarityKind::BothSides`] the stored points are already mapped, so
/// queries only need the (possibly identity) query-side map.
#[derive(Debug, Clone)]
pub struct KnnModel {
    points: Vec<f64>,
    stored_dim: usize,
    input_dim: usize,
    labels: Vec<usize>,
    class_count: usize,
    k: usize,
    dissimilarity: Dissimilarity,
}

impl KnnModel {
    pub fn new(labeled: &DMatrix<f64>, labels: Vec<usize>, k: usize, dissimilarity: Dissimilarity) -> Result<Self> {
        let (n, d) = labeled.shape();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("k = {k} must lie in [1, {n}]")));
        }
        if let Some(expected) = dissimilarity.input_dim() {
            if expected != d {
                return Err(Error::DimensionMismatch { expected, got: d });
            }
        }
        let mapped = dissimilarity.map_labeled(labeled);
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        Ok(KnnModel {
            stored_dim: mapped.ncols(),
            points: row_major(&mapped),
            input_dim: d,
            labels,
            class_count,
            k,
            dissimilarity,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.input_dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dissimilarity(&self) -> &Dissimilarity {
        &self.dissimilarity
    }

    /// The labeled points as stored (after the labeled-side map).
    pub fn stored_point(&self, i: usize) -> &[f64] {
        &self.points[i * self.stored_dim..(i + 1) * self.stored_dim]
    }

    /// Same labeled set with a different neighbor count.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!("k = {k} must lie in [1, {}]", self.len())));
        }
        Ok(KnnModel { k, ..self.clone() })
    }

    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<Neighbor>> {
        self.neighbors_k(query, self.k)
    }

    /// The `k` smallest dissimilarities, ascending, ties by lower index.
    pub fn neighbors_k(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        if query.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: query.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!("k = {k} must lie in [1, {}]", self.len())));
        }
        let mapped = self.dissimilarity.map_query(query);
        let q = mapped.as_deref().unwrap_or(query);
        let mut all: Vec<Neighbor> = (0..self.len())
            .map(|i| Neighbor {
                index: i,
                value: sq_euclidean(q, self.stored_point(i)),
            })
            .collect();
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, by_value_then_index);
            all.truncate(k);
        }
        all.sort_by(by_value_then_index);
        if !self.dissimilarity.squared {
            for nb in &mut all {
                nb.value = nb.value.sqrt();
            }
        }
        Ok(all)
    }

    pub fn classify(&self, query: &[f64]) -> Result<usize> {
        let nbrs = self.neighbors(query)?;
        Ok(vote(nbrs.iter().map(|nb| self.labels[nb.index]), self.class_count))
    }

    /// Neighbor lists for every row of `queries`, in row order.
    pub fn neighbors_batch(&self, queries: &DMatrix<f64>, k: usize) -> Result<Vec<Vec<Neighbor>>> {
        if queries.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: queries.ncols(),
            });
        }
        let flat = row_major(queries);
        let d = self.input_dim.max(1);
        flat.par_chunks(d)
            .take(queries.nrows())
            .map(|q| self.neighbors_k(q, k))
            .collect()
    }

    pub fn predict(&self, queries: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(self
            .neighbors_batch(queries, self.k)?
            .iter()
            .map(|nbrs| vote(nbrs.iter().map(|nb| self.labels[nb.index]), self.class_count))
            .collect())
    }

    pub fn evaluate(&self, queries: &DMatrix<f64>, true_labels: &[usize]) -> Result<f64> {
        if queries.nrows() == 0 {
            return Err(Error::InvalidArgument("no queries to evaluate".into()));
        }
        if true_labels.len() != queries.nrows() {
            return Err(Error::DimensionMismatch {
                expected: queries.nrows(),
                got: true_labels.len(),
            });
        }
        let pred = self.predict(queries)?;
        Ok(accuracy(&pred, true_labels))
    }
}

pub(crate) fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Majority label over neighbor labels given nearest first; among tied labels
/// the one whose first occurrence is nearest wins.
pub fn vote(labels: impl IntoIterator<Item = usize>, class_count: usize) -> usize {
    let mut counts = vec![0usize; class_count];
    let mut first_seen = vec![usize::MAX; class_count];
    for (rank, y) in labels.into_iter().enumerate() {
        if y >= counts.len() {
            counts.resize(y + 1, 0);
            first_seen.resize(y + 1, usize::MAX);
        }
        counts[y] += 1;
        first_seen[y] = first_seen[y].min(rank);
    }
    (0..counts.len())
        .filter(|&y| counts[y] > 0)
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(first_seen[b].cmp(&first_seen[a])))
        .expect("at least one neighbor")
}
