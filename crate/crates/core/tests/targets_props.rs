use hubless::targets::{indicator_matrix, select_targets, select_targets_for};
use hubless::{Dataset, IndicatorMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Same-class scan with a full sort on (squared distance, index).
fn oracle(x: &DMatrix<f64>, y: &[usize], k: usize) -> Vec<Vec<usize>> {
    (0..x.nrows())
        .map(|i| {
            let mut c: Vec<(f64, usize)> = (0..x.nrows())
                .filter(|&j| j != i && y[j] == y[i])
                .map(|j| ((x.row(i) - x.row(j)).norm_squared(), j))
                .collect();
            c.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            c.into_iter().take(k).map(|p| p.1).collect()
        })
        .collect()
}

fn data(seed: u64, n: usize, d: usize, classes: usize, grid: bool) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        if grid { g.round() } else { g }
    });
    // every class gets at least two members
    let y = (0..n).map(|i| if i < 2 * classes { i % classes } else { rng.random_range(0..classes) }).collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(seed in 0u64..100_000, classes in 1usize..4, extra in 0usize..60, d in 1usize..6, k in 1usize..4, grid in any::<bool>()) {
        let n = 2 * classes + extra;
        let (x, y) = data(seed, n, d, classes, grid);
        let t = select_targets_for(&x, &y, k).unwrap();
        prop_assert_eq!(&t.targets, &oracle(&x, &y, k));
    }

    #[test]
    fn invariants_hold(seed in 0u64..100_000, classes in 1usize..4, extra in 0usize..40, k in 1usize..4) {
        let n = 2 * classes + extra;
        let (x, y) = data(seed, n, 3, classes, false);
        let t = select_targets_for(&x, &y, k).unwrap();
        let j = t.indicator().unwrap();
        let sizes: Vec<usize> = (0..classes).map(|c| y.iter().filter(|&&l| l == c).count()).collect();
        for i in 0..n {
            prop_assert!(!j.get(i, i));
            prop_assert_eq!(j.row(i).len(), k.min(sizes[y[i]] - 1));
            prop_assert!(j.row(i).iter().all(|&t| y[t] == y[i]));
        }
        prop_assert_eq!(j.nnz(), j.row_sums().iter().sum::<usize>());
        prop_assert_eq!(j.transpose().transpose(), j.clone());
    }
}

#[test]
fn targets_index_the_training_subset() {
    let x = DMatrix::from_row_slice(6, 1, &[0.0, 10.0, 1.0, 11.0, 3.0, 50.0]);
    let ds = Dataset::new("t", x, vec![0, 1, 0, 1, 0, 1]).unwrap();
    let t = select_targets(&ds, &[4, 1, 0, 3], 1).unwrap();
    // train positions: 0 -> obj 4, 1 -> obj 1, 2 -> obj 0, 3 -> obj 3
    assert_eq!(t.targets, vec![vec![2], vec![3], vec![0], vec![1]]);
    let j = indicator_matrix(&t, 4).unwrap();
    assert_eq!(j.column_sums(), vec![1, 1, 1, 1]);
}

#[test]
fn singleton_class_is_rejected() {
    let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
    assert!(select_targets_for(&x, &[0, 0, 1], 1).is_err());
}

#[test]
fn indicator_validation() {
    assert!(IndicatorMatrix::from_rows(2, vec![vec![2], vec![]]).is_err());
    assert!(IndicatorMatrix::from_rows(2, vec![vec![1]]).is_err());
    let j = IndicatorMatrix::from_rows(3, vec![vec![2, 1, 2], vec![], vec![0]]).unwrap();
    assert_eq!(j.row(0), &[1, 2]);
    assert_eq!(j.to_dense(), DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
}
