//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use hubless::{Direction, DissimilarityKind, IndicatorMatrix};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random J with exactly `k` distinct non-self targets per row.
pub fn random_indicator(n: usize, k: usize, rng: &mut ChaCha8Rng) -> IndicatorMatrix {
    let rows = (0..n)
        .map(|i| {
            let mut row = Vec::new();
            while row.len() < k {
                let t = rng.random_range(0..n);
                if t != i && !row.contains(&t) {
                    row.push(t);
                }
            }
            row
        })
        .collect();
    IndicatorMatrix::from_rows(n, rows).unwrap()
}

/// (target, source) pairs: the objective is sum ||a - W b||^2 + lambda ||W||^2.
fn regression_pairs(j: &IndicatorMatrix, direction: Direction) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..j.size() {
        for &t in j.row(i) {
            pairs.push(match direction {
                Direction::MoveLabeled => (i, t),
                Direction::MoveQuery => (t, i),
            });
        }
    }
    pairs
}

fn gradient(x: &DMatrix<f64>, pairs: &[(usize, usize)], w: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let d = x.ncols();
    let mut g = w * (2.0 * lambda);
    for &(a, b) in pairs {
        for r in 0..d {
            let mut wb = 0.0;
            for c in 0..d {
                wb += w[(r, c)] * x[(b, c)];
            }
            let res = x[(a, r)] - wb;
            for c in 0..d {
                g[(r, c)] -= 2.0 * res * x[(b, c)];
            }
        }
    }
    g
}

/// Curvature of the objective along `p`: sum ||P b||^2 + lambda ||P||^2.
fn curvature(x: &DMatrix<f64>, pairs: &[(usize, usize)], p: &DMatrix<f64>, lambda: f64) -> f64 {
    let d = x.ncols();
    let mut total = lambda * p.norm_squared();
    for &(_, b) in pairs {
        for r in 0..d {
            let mut pb = 0.0;
            for c in 0..d {
                pb += p[(r, c)] * x[(b, c)];
            }
            total += pb * pb;
        }
    }
    total
}

/// Minimizes the pairwise ridge objective by conjugate gradients with exact
/// line search, touching only the individual pair residuals.
pub fn ridge_oracle(x: &DMatrix<f64>, j: &IndicatorMatrix, lambda: f64, direction: Direction) -> DMatrix<f64> {
    let d = x.ncols();
    let pairs = regression_pairs(j, direction);
    let mut w = DMatrix::zeros(d, d);
    let mut g = gradient(x, &pairs, &w, lambda);
    let g0 = g.norm();
    let mut p = -&g;
    let max_iter = 20 * d * d + 200;
    for it in 0..max_iter {
        if g.norm() <= 1e-14 * g0 {
            break;
        }
        let h = curvature(x, &pairs, &p, lambda);
        if h <= 0.0 {
            break;
        }
        let t = -g.dot(&p) / (2.0 * h);
        w += &p * t;
        // recompute rather than update, to keep rounding from accumulating
        let g_new = gradient(x, &pairs, &w, lambda);
        let beta = if (it + 1) % (d * d) == 0 {
            0.0
        } else {
            (g_new.norm_squared() - g_new.dot(&g)).max(0.0) / g.norm_squared()
        };
        p = -&g_new + &p * beta;
        g = g_new;
    }
    w
}

fn naive_apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
        .collect()
}

fn naive_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Linear scan over every labeled point followed by a full sort on
/// (dissimilarity, index). Maps are applied with plain loops.
pub struct BruteForce {
    kind: DissimilarityKind,
    mapped: Vec<Vec<f64>>,
}

impl BruteForce {
    pub fn new(kind: &DissimilarityKind, labeled: &DMatrix<f64>) -> Self {
        let mapped = (0..labeled.nrows())
            .map(|i| {
                let z: Vec<f64> = labeled.row(i).iter().copied().collect();
                match kind {
                    DissimilarityKind::TransformedLabeled(m) | DissimilarityKind::BothSides(m) => naive_apply(m, &z),
                    _ => z,
                }
            })
            .collect();
        BruteForce { kind: kind.clone(), mapped }
    }

    pub fn neighbors(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        let q = match &self.kind {
            DissimilarityKind::TransformedQuery(m) | DissimilarityKind::BothSides(m) => naive_apply(m, query),
            _ => query.to_vec(),
        };
        let mut all: Vec<(usize, f64)> = self.mapped.iter().enumerate().map(|(i, z)| (i, naive_sq_dist(&q, z))).collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }
}

/// Majority label; a tie goes to the label met first when walking outward.
pub fn brute_force_vote(labels: &[usize]) -> usize {
    let count = |y: usize| labels.iter().filter(|&&l| l == y).count();
    let best = labels.iter().map(|&y| count(y)).max().unwrap();
    *labels.iter().find(|&&y| count(y) == best).unwrap()
}

/// Population skewness of integer counts, moments computed in exact rationals.
pub fn exact_skewness(counts: &[i64]) -> Option<f64> {
    let n = BigRational::from_integer(BigInt::from(counts.len()));
    let vals: Vec<BigRational> = counts.iter().map(|&c| BigRational::from_integer(BigInt::from(c))).collect();
    let mean = vals.iter().fold(BigRational::zero(), |a, v| a + v) / &n;
    let mut m2 = BigRational::zero();
    let mut m3 = BigRational::zero();
    for v in &vals {
        let dv = v - &mean;
        m2 += &dv * &dv;
        m3 += &dv * &dv * &dv;
    }
    let m2 = m2 / &n;
    let m3 = m3 / &n;
    if m2.is_zero() {
        return None;
    }
    // skew^2 = m3^2 / m2^3, exact until the final square root
    let sq = (&m3 * &m3) / (&m2 * &m2 * &m2);
    let mag = sq.to_f64().unwrap().sqrt();
    Some(if m3.is_negative() { -mag } else { mag })
}
