//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `(Xβ − y)ᵀ(Xβ − y) + λ‖β‖₁`, written out element by element.
pub fn lasso_objective_naive(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], lambda: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..x.nrows() {
        let mut r = -y[i];
        for (j, b) in beta.iter().enumerate() {
            r += x[(i, j)] * b;
        }
        sq += r * r;
    }
    sq + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Grid search for the LASSO minimizer with `n ≤ 3`: an aligned lattice over
/// `[-bound, bound]ⁿ`, then repeated 5× refinement around the best point
/// until the step is below `final_step`.
pub fn lasso_grid_oracle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    bound: f64,
    final_step: f64,
) -> Vec<f64> {
    let n = x.ncols();
    assert!((1..=3).contains(&n));
    let g = x.transpose() * x;
    let b = x.transpose() * y;
    let yy = y.dot(y);
    let obj = |p: &[f64]| {
        let mut v = yy;
        for i in 0..n {
            v -= 2.0 * p[i] * b[i];
            for j in 0..n {
                v += p[i] * g[(i, j)] * p[j];
            }
            v += lambda * p[i].abs();
        }
        v
    };
    let search = |center: &[f64], step: f64, half: i64| -> Vec<f64> {
        let mut best = center.to_vec();
        let mut best_val = obj(&best);
        let mut idx = vec![-half; n];
        loop {
            let p: Vec<f64> = (0..n).map(|k| center[k] + idx[k] as f64 * step).collect();
            let v = obj(&p);
            if v < best_val {
                best_val = v;
                best = p;
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                idx[k] += 1;
                if idx[k] <= half {
                    break;
                }
                idx[k] = -half;
                k += 1;
            }
        }
    };
    let mut step = 0.25;
    let half = (bound / step).ceil() as i64;
    let mut best = search(&vec![0.0; n], step, half);
    while step > final_step {
        step /= 5.0;
        best = search(&best, step, 15);
        // snap to the lattice so exact zeros stay reachable
        for v in best.iter_mut() {
            *v = (*v / step).round() * step;
        }
    }
    best
}

/// `Σ_k x[k,i]·x[k,j]` for every pair, by double loop.
pub fn covariance_naive(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..x.nrows() {
                s += x[(k, i)] * x[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// Each column divided by its Euclidean norm, by explicit loops.
pub fn normalize_naive(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let norm = (0..x.nrows())
            .map(|i| x[(i, j)] * x[(i, j)])
            .sum::<f64>()
            .sqrt();
        for i in 0..x.nrows() {
            out[(i, j)] = if norm > 1e-12 { x[(i, j)] / norm } else { 0.0 };
        }
    }
    out
}

pub fn rmse_naive(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (p, q) in a.iter().zip(b) {
        s += (p - q) * (p - q);
    }
    (s / a.len() as f64).sqrt()
}

/// Upper tail `P(Bin(n, p) ≥ k)` summed term by term in log space.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    let mut table = vec![0.0f64; n as usize + 1];
    for i in 1..=n as usize {
        table[i] = table[i - 1] + (i as f64).ln();
    }
    let ln_fact = |v: u64| table[v as usize];
    let ln_n = ln_fact(n);
    (k..=n)
        .map(|i| {
            (ln_n - ln_fact(i) - ln_fact(n - i)
                + i as f64 * p.ln()
                + (n - i) as f64 * (1.0 - p).ln())
            .exp()
        })
        .sum()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
