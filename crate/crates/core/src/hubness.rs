//! k-occurrence counts N_k and their skewness.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::datamodel::{Dataset, Split};
use crate::error::{Error, Result};
use crate::knn::KnnModel;

/// Neighborhood size of the hubness measure.
pub const HUBNESS_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NkStats {
    pub counts: Vec<usize>,
    pub k: usize,
    pub n_queries: usize,
    pub mean: f64,
    pub variance: f64,
    /// `None` when every labeled object occurs equally often.
    pub skewness: Option<f64>,
}

impl NkStats {
    pub fn compute(model: &KnnModel, queries: &DMatrix<f64>, k: usize) -> Result<Self> {
        let counts = nk_counts(model, queries, k)?;
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let (mean, variance) = moments(&values);
        Ok(NkStats {
            skewness: skewness(&values).ok(),
            counts,
            k,
            n_queries: queries.nrows(),
            mean,
            variance,
        })
    }

    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// `counts[i]` = number of queries whose k nearest labeled objects include `i`.
pub fn nk_counts(model: &KnnModel, queries: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > model.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in [1, {}] labeled objects",
            model.len()
        )));
    }
    if queries.nrows() == 0 {
        return Err(Error::InvalidArgument("no queries".into()));
    }
    let mut counts = vec![0usize; model.len()];
    for nbrs in model.neighbors_batch(queries, k)? {
        for nb in nbrs {
            counts[nb.index] += 1;
        }
    }
    Ok(counts)
}

/// Population mean and variance (divide by n).
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Third standardized central moment with population (divide-by-n) moments.
pub fn skewness(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("skewness needs at least two values".into()));
    }
    let (mean, var) = moments(values);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(var > (1e-14 * scale).powi(2)) {
        return Err(Error::ZeroVariance);
    }
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / values.len() as f64;
    Ok(m3 / var.powf(1.5))
}

pub fn count_skewness(counts: &[usize]) -> Result<f64> {
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    skewness(&values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HubnessRow {
    pub method: String,
    pub k: usize,
    pub skewness: f64,
    pub max_count: usize,
    pub mean_count: f64,
}

/// One skewness row per model, with the test partition as queries. Every model
/// must have been built on the split's training partition of `dataset`.
pub fn hubness_report(dataset: &Dataset, split: &Split, models: &[(String, KnnModel)], k: usize) -> Result<Vec<HubnessRow>> {
    let (queries, _) = dataset.rows(&split.test_indices)?;
    models
        .iter()
        .map(|(name, model)| {
            if model.len() != split.train_indices.len() {
                return Err(Error::DimensionMismatch {
                    expected: split.train_indices.len(),
                    got: model.len(),
                }
                .context(format!("model `{name}` labeled set")));
            }
            let stats = NkStats::compute(model, &queries, k).map_err(|e| e.context(name.clone()))?;
            Ok(HubnessRow {
                method: name.clone(),
                k,
                skewness: stats.skewness.ok_or(Error::ZeroVariance).map_err(|e| e.context(name.clone()))?,
                max_count: stats.max_count(),
                mean_count: stats.mean,
            })
        })
        .collect()
}

pub fn hubness_csv(rows: &[HubnessRow]) -> String {
    let mut out = String::from("method,k,skewness,max_count,mean_count\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.method, r.k, r.skewness, r.max_count, r.mean_count));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::Dissimilarity;

    #[test]
    fn constant_counts_are_an_error() {
        assert!(matches!(count_skewness(&[1, 1, 1, 1]), Err(Error::ZeroVariance)));
        assert!(matches!(skewness(&[0.3; 7]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn symmetric_counts_have_zero_skew() {
        assert!(count_skewness(&[0, 1, 2, 3, 4]).unwrap().abs() < 1e-12);
        assert!(count_skewness(&[2, 8, 2, 8]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn hub_like_counts() {
        // mean 1.2; deviations 7.8, -0.2 x3, -1.2 x6
        let m2 = (7.8f64.powi(2) + 3.0 * 0.04 + 6.0 * 1.44) / 10.0;
        let m3 = (7.8f64.powi(3) - 3.0 * 0.008 - 6.0 * 1.728) / 10.0;
        let s = count_skewness(&[9, 1, 1, 1, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!((s - m3 / m2.powf(1.5)).abs() < 1e-12);
        assert!(s > 2.0);
    }

    #[test]
    fn counts_conserve_mass() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i * 3 + j) as f64);
        let m = KnnModel::new(&x, vec![0; 6], 1, Dissimilarity::euclidean()).unwrap();
        let q = DMatrix::from_row_slice(1, 2, &[0.1, 0.9]);
        let c = nk_counts(&m, &q, 1).unwrap();
        assert_eq!(c, vec![1, 0, 0, 0, 0, 0]);
        assert_eq!(nk_counts(&m, &x, 1).unwrap(), vec![1; 6]);
        let stats = NkStats::compute(&m, &x, 3).unwrap();
        assert_eq!(stats.counts.iter().sum::<usize>(), 18);
        assert!((stats.mean - 3.0).abs() < 1e-15);
        assert!(nk_counts(&m, &x, 7).is_err());
    }

    #[test]
    fn csv_header() {
        let rows = vec![HubnessRow { method: "euclidean".into(), k: 10, skewness: 0.5, max_count: 7, mean_count: 10.0 }];
        assert_eq!(hubness_csv(&rows), "method,k,skewness,max_count,mean_count\neuclidean,10,0.5,7,10\n");
    }
}
