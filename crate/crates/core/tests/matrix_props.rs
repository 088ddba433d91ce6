mod common;

use common::{covariance_naive, gaussian_matrix, normalize_naive, rng};
use covsparse::matrix::normalize_columns_with;
use covsparse::{
    empirical_covariance, normalize_columns, project_observed, svd_soft_threshold,
    CovarianceMatrix, MaskedMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn sorted_singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = x
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn numerical_rank(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > 1e-9 * top.max(1e-300)).count()
}

fn random_mask(seed: u64, m: usize, n: usize, p: f64) -> DMatrix<bool> {
    let mut r = rng(seed);
    DMatrix::from_fn(m, n, |_, _| r.random::<f64>() < p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_contracting(m in 1usize..12, n in 1usize..12, p in 0.0f64..1.0, seed in any::<u64>()) {
        let x = gaussian_matrix(&mut rng(seed), m, n);
        let mask = random_mask(seed ^ 1, m, n, p);
        let once = project_observed(&x, &mask).unwrap();
        let twice = project_observed(&once, &mask).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.norm() <= x.norm());
        for i in 0..m {
            for j in 0..n {
                let expected = x[(i, j)] * if mask[(i, j)] { 1.0 } else { 0.0 };
                prop_assert_eq!(once[(i, j)], expected);
            }
        }
    }

    #[test]
    fn masked_matrix_keeps_observed_values(m in 1usize..8, n in 1usize..8, seed in any::<u64>()) {
        let x = gaussian_matrix(&mut rng(seed), m, n);
        let mask = random_mask(seed ^ 2, m, n, 0.6);
        let mm = MaskedMatrix::new(x.clone(), mask.clone()).unwrap();
        prop_assert_eq!(mm.values(), &project_observed(&x, &mask).unwrap());
        prop_assert_eq!(mm.observed_count(), mask.iter().filter(|b| **b).count());
    }

    #[test]
    fn normalized_columns_have_unit_or_zero_norm(m in 1usize..10, n in 1usize..8, zero_col in 0usize..8, seed in any::<u64>()) {
        let mut x = gaussian_matrix(&mut rng(seed), m, n);
        if zero_col < n {
            x.column_mut(zero_col).fill(0.0);
        }
        let out = normalize_columns(&x);
        for j in 0..n {
            let norm = out.matrix.column(j).norm();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-9, "column {} norm {}", j, norm);
            prop_assert_eq!(out.degenerate[j], norm == 0.0);
        }
        prop_assert!((&out.matrix - normalize_naive(&x)).abs().max() <= 1e-14);
    }

    #[test]
    fn covariance_matches_double_loop(m in 1usize..12, n in 1usize..8, seed in any::<u64>()) {
        let x = normalize_columns(&gaussian_matrix(&mut rng(seed), m, n)).matrix;
        let c = empirical_covariance(&x);
        let oracle = covariance_naive(&x);
        for i in 0..n {
            prop_assert!((c.get(i, i) - 1.0).abs() <= 1e-9);
            for j in 0..n {
                prop_assert_eq!(c.get(i, j).to_bits(), c.get(j, i).to_bits());
                prop_assert!((c.get(i, j) - oracle[(i, j)]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn covariance_text_round_trip(n in 1usize..7, seed in any::<u64>()) {
        let x = normalize_columns(&gaussian_matrix(&mut rng(seed), 9, n)).matrix;
        let c = empirical_covariance(&x);
        let back = CovarianceMatrix::parse_text(&c.to_text()).unwrap();
        prop_assert!((back.entries() - c.entries()).abs().max() <= 1e-8);
        prop_assert_eq!(back.entries(), &back.entries().transpose());
    }

    #[test]
    fn svt_shrinks_every_singular_value(m in 1usize..15, n in 1usize..15, tau in 0.0f64..3.0, seed in any::<u64>()) {
        let x = gaussian_matrix(&mut rng(seed), m, n);
        let out = svd_soft_threshold(&x, tau).unwrap();
        let s_in = sorted_singular_values(&x);
        let s_out = sorted_singular_values(&out);
        for (a, b) in s_out.iter().zip(&s_in) {
            prop_assert!(*a <= *b + 1e-9);
            prop_assert!((a - (b - tau).max(0.0)).abs() <= 1e-8);
        }
        prop_assert!(numerical_rank(&s_out) <= numerical_rank(&s_in));
    }

    #[test]
    fn svt_respects_low_rank_input(m in 2usize..12, n in 2usize..12, r in 1usize..3, seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = gaussian_matrix(&mut g, m, r) * gaussian_matrix(&mut g, r, n);
        let out = svd_soft_threshold(&x, 0.1).unwrap();
        prop_assert!(numerical_rank(&sorted_singular_values(&out)) <= r.min(m).min(n));
    }

    #[test]
    fn svt_with_negligible_threshold_reproduces_low_rank_input(
        long in 20usize..90, short in 2usize..16, r in 1usize..5, tall in any::<bool>(), seed in any::<u64>()
    ) {
        let mut g = rng(seed);
        let (m, n) = if tall { (long, short) } else { (short, long) };
        let x = gaussian_matrix(&mut g, m, r) * gaussian_matrix(&mut g, r, n);
        let out = svd_soft_threshold(&x, 1e-300).unwrap();
        prop_assert!((&out - &x).norm() <= 1e-12 * x.norm());
    }
}

#[test]
fn centered_normalization_is_a_correlation_matrix() {
    let x = gaussian_matrix(&mut rng(5), 40, 5).add_scalar(3.0);
    let c = empirical_covariance(&normalize_columns_with(&x, true).matrix);
    for i in 0..5 {
        assert!((c.get(i, i) - 1.0).abs() < 1e-12);
        for j in 0..5 {
            assert!(c.get(i, j).abs() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn normalized_example_has_expected_off_diagonal() {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    let c = empirical_covariance(&normalize_columns(&x).matrix);
    let oracle = covariance_naive(&normalize_naive(&x));
    assert!((c.get(0, 1) - oracle[(0, 1)]).abs() < 1e-15);
    assert!((c.get(0, 1) - 0.5f64.sqrt()).abs() < 1e-12);
}
