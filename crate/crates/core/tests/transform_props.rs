mod common;

use common::{gaussian, random_indicator, ridge_oracle};
use hubless::targets::select_targets_for;
use hubless::transform::{fit_move_labeled, fit_move_query, normal_equation_residual, objective, transform_points, RidgeSystem};
use hubless::{Direction, IndicatorMatrix, SolverMode, TransformModel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(seed: u64, n: usize, d: usize, k: usize) -> (DMatrix<f64>, IndicatorMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, d, &mut rng);
    let j = random_indicator(n, k, &mut rng);
    (x, j)
}

#[test]
fn move_query_matches_pairwise_oracle() {
    for seed in 0..10 {
        for lambda in [0.0, 0.5, 20.0] {
            let (x, j) = problem(seed, 40, 6, 1 + seed as usize % 3);
            let w = fit_move_query(&x, &j, lambda).unwrap();
            let oracle = ridge_oracle(&x, &j, lambda, Direction::MoveQuery);
            assert!((w.w() - &oracle).norm() / oracle.norm() < 1e-8);
        }
    }
}

#[test]
fn exact_minimizer_beats_paper_form_on_the_objective() {
    for seed in 0..20 {
        let (x, j) = problem(seed, 30, 5, 2);
        for lambda in [0.0, 0.1, 10.0] {
            let exact = fit_move_labeled(&x, &j, lambda, SolverMode::ExactMinimizer).unwrap();
            let paper = fit_move_labeled(&x, &j, lambda, SolverMode::PaperClosedForm).unwrap();
            let fe = objective(&x, &j, exact.w(), lambda, Direction::MoveLabeled);
            let fp = objective(&x, &j, paper.w(), lambda, Direction::MoveLabeled);
            assert!(fe <= fp * (1.0 + 1e-12));
        }
    }
}

#[test]
fn solvers_agree_when_every_point_is_targeted_once() {
    // J a permutation: column sums all 1, so X diag(c) X^T = X X^T
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = gaussian(25, 4, &mut rng);
    let rows: Vec<Vec<usize>> = (0..25).map(|i| vec![(i + 7) % 25]).collect();
    let j = IndicatorMatrix::from_rows(25, rows).unwrap();
    let a = fit_move_labeled(&x, &j, 0.3, SolverMode::ExactMinimizer).unwrap();
    let b = fit_move_labeled(&x, &j, 0.3, SolverMode::PaperClosedForm).unwrap();
    assert!((a.w() - b.w()).norm() < 1e-12 * a.w().norm());
}

#[test]
fn single_labeled_pair_closed_form() {
    // n = 2, d = 1, each point targets the other: W = 2ab / (a^2 + b^2 + lambda)
    let x = DMatrix::from_row_slice(2, 1, &[2.0, 3.0]);
    let j = IndicatorMatrix::from_rows(2, vec![vec![1], vec![0]]).unwrap();
    let w = fit_move_labeled(&x, &j, 1.0, SolverMode::PaperClosedForm).unwrap();
    assert!((w.w()[(0, 0)] - 12.0 / 14.0).abs() < 1e-15);
}

#[test]
fn zero_targets_give_zero_transform() {
    let (x, _) = problem(4, 10, 3, 1);
    let j = IndicatorMatrix::from_rows(10, vec![Vec::new(); 10]).unwrap();
    let w = fit_move_labeled(&x, &j, 1.0, SolverMode::PaperClosedForm).unwrap();
    assert_eq!(w.w().norm(), 0.0);
}

#[test]
fn rank_deficient_without_ridge_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = gaussian(20, 2, &mut rng);
    // third coordinate copies the first
    let x = DMatrix::from_fn(20, 3, |i, c| base[(i, c.min(1) * (c % 2))]);
    let j = random_indicator(20, 1, &mut rng);
    assert!(fit_move_labeled(&x, &j, 0.0, SolverMode::PaperClosedForm).is_err());
    assert!(fit_move_labeled(&x, &j, 1e-3, SolverMode::PaperClosedForm).is_ok());
}

#[test]
fn residual_helper_matches_direct_computation() {
    let (x, j) = problem(9, 30, 4, 2);
    let system = RidgeSystem::new(&x, &j, Direction::MoveLabeled, SolverMode::PaperClosedForm).unwrap();
    let model = system.solve(0.7).unwrap();
    assert!(normal_equation_residual(&system, &model) < 1e-12);
    let bad = TransformModel::new(model.w() * 1.01, Direction::MoveLabeled, 0.7, SolverMode::PaperClosedForm).unwrap();
    assert!(normal_equation_residual(&system, &bad) > 1e-3);
}

#[test]
fn transform_points_applies_w_to_rows() {
    let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
    let m = TransformModel::new(w, Direction::MoveLabeled, 0.0, SolverMode::PaperClosedForm).unwrap();
    let y = transform_points(&m, &DMatrix::from_row_slice(1, 2, &[3.0, 5.0])).unwrap();
    assert_eq!(y.as_slice(), &[5.0, 6.0]);
    assert!(transform_points(&m, &DMatrix::zeros(1, 3)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shrinkage_is_monotone(seed in 0u64..10_000, n in 4usize..40, d in 1usize..8, k in 1usize..3) {
        let (x, j) = problem(seed, n, d, k.min(n - 1));
        let system = RidgeSystem::new(&x, &j, Direction::MoveLabeled, SolverMode::PaperClosedForm).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [1e-2, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let norm = system.solve(lambda).unwrap().w().norm();
            prop_assert!(norm <= prev * (1.0 + 1e-12));
            prev = norm;
        }
    }

    #[test]
    fn exact_minimizer_is_stationary(seed in 0u64..10_000, n in 4usize..30, d in 1usize..6, lambda in 0.01f64..50.0) {
        let (x, j) = problem(seed, n, d, 1);
        let w = fit_move_labeled(&x, &j, lambda, SolverMode::ExactMinimizer).unwrap();
        let f0 = objective(&x, &j, w.w(), lambda, Direction::MoveLabeled);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        for _ in 0..5 {
            let p = gaussian(d, d, &mut rng) * 1e-3;
            prop_assert!(objective(&x, &j, &(w.w() + &p), lambda, Direction::MoveLabeled) >= f0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn object_order_does_not_change_w(seed in 0u64..10_000, n in 6usize..30, d in 1usize..6) {
        // reordering objects, with J relabeled to match, leaves W unchanged
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(n, d, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let j = select_targets_for(&x, &labels, 1).unwrap().indicator().unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let xp = DMatrix::from_fn(n, d, |i, c| x[(perm[i], c)]);
        let inv: Vec<usize> = (0..n).map(|i| perm.iter().position(|&p| p == i).unwrap()).collect();
        let jp = IndicatorMatrix::from_rows(n, (0..n).map(|i| j.row(perm[i]).iter().map(|&t| inv[t]).collect()).collect()).unwrap();
        let a = fit_move_labeled(&x, &j, 0.5, SolverMode::PaperClosedForm).unwrap();
        let b = fit_move_labeled(&xp, &jp, 0.5, SolverMode::PaperClosedForm).unwrap();
        prop_assert!((a.w() - b.w()).norm() <= 1e-10 * (1.0 + a.w().norm()));
    }

    #[test]
    fn json_round_trip_is_exact(seed in 0u64..10_000, d in 1usize..6, lambda in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = TransformModel::new(gaussian(d, d, &mut rng), Direction::MoveQuery, lambda, SolverMode::ExactMinimizer).unwrap();
        prop_assert_eq!(TransformModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}

#[test]
fn move_labeled_pulls_mapped_targets_toward_sources() {
    // ridge-fitted W reduces the summed pair residual relative to W = 0
    let (x, j) = problem(12, 60, 5, 2);
    let w = fit_move_labeled(&x, &j, 1.0, SolverMode::ExactMinimizer).unwrap();
    let zero = DMatrix::zeros(5, 5);
    let ident = DMatrix::identity(5, 5);
    let f = |m: &DMatrix<f64>| objective(&x, &j, m, 0.0, Direction::MoveLabeled);
    assert!(f(w.w()) < f(&zero));
    assert!(f(w.w()) < f(&ident));
}
