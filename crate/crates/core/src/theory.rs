//! Monte-Carlo check of the spatial-centrality bias: for data drawn from
//! N(0, s^2 I) in d dimensions and two data points whose squared norms differ
//! by `gamma` standard deviations of `||z||^2`, a zero-mean query is on average
//! `gamma * s^2 * sqrt(2d)` closer (in squared distance) to the inner point.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hubness::{nk_counts, HUBNESS_K};
use crate::knn::{sq_euclidean, Dissimilarity, KnnModel};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityExperiment {
    pub d: usize,
    /// Per-coordinate standard deviation of the data law.
    pub s: f64,
    /// Gap between the squared norms of the pair, in units of sd(||z||^2).
    pub gamma: f64,
    pub n_queries: usize,
    pub seed: u64,
    /// Per-coordinate standard deviation of the queries.
    #[serde(default = "unit")]
    pub query_sd: f64,
    /// Mean offset of the queries along the unit vector from z1 to z2.
    #[serde(default)]
    pub query_shift: f64,
}

fn unit() -> f64 {
    1.0
}

impl CentralityExperiment {
    pub fn new(d: usize, s: f64, gamma: f64, n_queries: usize, seed: u64) -> Self {
        CentralityExperiment {
            d,
            s,
            gamma,
            n_queries,
            seed,
            query_sd: 1.0,
            query_shift: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || !(self.s > 0.0) || self.n_queries == 0 || !(self.query_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need d >= 1, s > 0, n_queries >= 1, query_sd >= 0; got {self:?}"
            )));
        }
        if !self.gamma.is_finite() || !self.query_shift.is_finite() {
            return Err(Error::InvalidArgument("gamma and query_shift must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityResult {
    pub delta_hat: f64,
    pub delta_theory: f64,
    pub std_error: f64,
    pub d: usize,
    pub s: f64,
    pub gamma: f64,
    pub n_queries: usize,
}

/// sd of `||z||^2` for `z ~ N(0, s^2 I_d)`.
pub fn norm_sq_sd(d: usize, s: f64) -> f64 {
    s * s * (2.0 * d as f64).sqrt()
}

pub fn theoretical_delta(d: usize, s: f64, gamma: f64) -> f64 {
    gamma * norm_sq_sd(d, s)
}

/// Draws `z1 ~ N(0, s^2 I)` and a `z2` in a fresh random direction with
/// `||z2||^2 = ||z1||^2 + gamma * sigma`.
pub fn conditioned_pair(d: usize, s: f64, gamma: f64, rng: &mut impl Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let normal = Normal::new(0.0, s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let z1: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
    let target = z1.iter().map(|v| v * v).sum::<f64>() + gamma * norm_sq_sd(d, s);
    if !(target > 0.0) {
        return Err(Error::Construction(format!(
            "no z2 with squared norm {target:.3e} (gamma = {gamma} too negative for d = {d})"
        )));
    }
    let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = target.sqrt() / norm;
    dir.iter_mut().for_each(|v| *v *= scale);
    Ok((z1, dir))
}

/// Running (count, mean, sum of squared deviations).
#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64 + 1);
    rng
}

/// Estimates `E||x - z2||^2 - E||x - z1||^2` over `n_queries` draws. Queries are
/// generated in fixed-size chunks with one random stream per chunk, so the
/// result depends only on the seed.
pub fn simulate_delta(exp: &CentralityExperiment) -> Result<CentralityResult> {
    exp.validate()?;
    let d = exp.d;
    let mut pair_rng = chunk_rng(exp.seed, usize::MAX - 1);
    let (z1, z2) = conditioned_pair(d, exp.s, exp.gamma, &mut pair_rng)?;
    let gap: Vec<f64> = z2.iter().zip(&z1).map(|(a, b)| a - b).collect();
    let gap_norm = gap.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shift: Vec<f64> = if gap_norm > 0.0 {
        gap.iter().map(|v| exp.query_shift * v / gap_norm).collect()
    } else {
        vec![0.0; d]
    };

    let n_chunks = exp.n_queries.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(exp.seed, c);
            let len = CHUNK.min(exp.n_queries - c * CHUNK);
            let mut x = vec![0.0; d];
            let mut m = Moments::default();
            for _ in 0..len {
                for (xi, sh) in x.iter_mut().zip(&shift) {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *xi = exp.query_sd * g + sh;
                }
                m.push(sq_euclidean(&x, &z2) - sq_euclidean(&x, &z1));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);

    let std_error = if total.n > 1.0 {
        (total.m2 / (total.n - 1.0) / total.n).sqrt()
    } else {
        0.0
    };
    Ok(CentralityResult {
        delta_hat: total.mean,
        delta_theory: theoretical_delta(d, exp.s, exp.gamma),
        std_error,
        d,
        s: exp.s,
        gamma: exp.gamma,
        n_queries: exp.n_queries,
    })
}

/// Runs `simulate_delta` over the grid `ds x ss x gammas`, cell seeds derived
/// from `seed` by cell position.
pub fn centrality_sweep(ds: &[usize], ss: &[f64], gammas: &[f64], n_queries: usize, seed: u64) -> Result<Vec<CentralityResult>> {
    let mut out = Vec::with_capacity(ds.len() * ss.len() * gammas.len());
    let mut cell = 0u64;
    for &d in ds {
        for &s in ss {
            for &gamma in gammas {
                out.push(simulate_delta(&CentralityExperiment::new(d, s, gamma, n_queries, seed.wrapping_add(cell)))?);
                cell += 1;
            }
        }
    }
    Ok(out)
}

pub fn sweep_csv(rows: &[CentralityResult]) -> String {
    let mut out = String::from("d,s,gamma,n_queries,delta_hat,delta_theory,std_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.d, r.s, r.gamma, r.n_queries, r.delta_hat, r.delta_theory, r.std_error
        ));
    }
    out
}

/// Spearman rank correlation, average ranks for ties. Zero if either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut start = 0;
        while start < idx.len() {
            let mut end = start + 1;
            while end < idx.len() && v[idx[end]] == v[idx[start]] {
                end += 1;
            }
            let avg = (start + end - 1) as f64 / 2.0 + 1.0;
            for &i in &idx[start..end] {
                r[i] = avg;
            }
            start = end;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Samples `n_data` points from N(0, s_data^2 I) and `n_queries` from N(0, I),
/// and returns the rank correlation between closeness to the origin
/// (`-||z_i||`) and the N_10 count of each data point.
pub fn hub_tendency_demo(d: usize, s_data: f64, n_data: usize, n_queries: usize, seed: u64) -> Result<f64> {
    if n_data < 2 * HUBNESS_K || d == 0 || n_queries == 0 || !(s_data > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n_data >= {}, d >= 1, n_queries >= 1, s_data > 0",
            2 * HUBNESS_K
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = DMatrix::from_fn(n_data, d, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        s_data * g
    });
    let queries = DMatrix::from_fn(n_queries, d, |_, _| StandardNormal.sample(&mut rng));
    let model = KnnModel::new(&data, vec![0; n_data], HUBNESS_K, Dissimilarity::euclidean())?;
    let counts: Vec<f64> = nk_counts(&model, &queries, HUBNESS_K)?
        .into_iter()
        .map(|c| c as f64)
        .collect();
    let closeness: Vec<f64> = data.row_iter().map(|r| -r.norm()).collect();
    Ok(spearman(&closeness, &counts))
}
