use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// A stratified train/test partition of `[0, n)`. Index lists are ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    #[serde(default = "one")]
    pub version: u32,
    pub seed: u64,
    pub train_fraction: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn one() -> u32 {
    1
}

/// Random stratified split with `round(train_fraction * n)` training objects,
/// at least one per class.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let sizes = dataset.class_sizes();
    if let Some((class, &count)) = sizes.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::ClassTooSmall { class, count, needed: 2 });
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    let quotas = allocate(&sizes, train_fraction, n_train)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        members[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (idx, quota) in members.iter_mut().zip(&quotas) {
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..*quota]);
        test.extend_from_slice(&idx[*quota..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        version: 1,
        seed,
        train_fraction,
        train_indices: train,
        test_indices: test,
    })
}

/// Per-class train counts summing to `total`: proportional shares rounded by
/// largest remainder, with every class given at least one slot.
fn allocate(sizes: &[usize], fraction: f64, total: usize) -> Result<Vec<usize>> {
    if total < sizes.len() {
        return Err(Error::InvalidArgument(format!(
            "{total} training objects cannot cover {} classes",
            sizes.len()
        )));
    }
    let ideal: Vec<f64> = sizes.iter().map(|&m| fraction * m as f64).collect();
    let mut quota: Vec<usize> = ideal
        .iter()
        .zip(sizes)
        .map(|(&q, &m)| (q.floor() as usize).clamp(1, m))
        .collect();
    let mut assigned: usize = quota.iter().sum();

    // classes ordered by descending fractional remainder, then by id
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - quota[a] as f64;
        let rb = ideal[b] - quota[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    while assigned < total {
        let before = assigned;
        for &c in &order {
            if assigned == total {
                break;
            }
            if quota[c] < sizes[c] {
                quota[c] += 1;
                assigned += 1;
            }
        }
        debug_assert!(assigned > before, "total never exceeds n");
    }
    while assigned > total {
        let before = assigned;
        for &c in order.iter().rev() {
            if assigned == total {
                break;
            }
            if quota[c] > 1 {
                quota[c] -= 1;
                assigned -= 1;
            }
        }
        debug_assert!(assigned < before, "total covers every class");
    }
    Ok(quota)
}
