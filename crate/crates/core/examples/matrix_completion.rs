//! Fill in the missing entries of a low-rank matrix with nuclear-norm
//! regularized completion, and watch the objective fall.

use covsparse::completion::complete_nuclear_traced;
use covsparse::{mean_impute, CompletionConfig, MaskedMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> covsparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = DVector::from_fn(40, |_, _| rng.random_range(-1.0..1.0));
    let v = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
    let truth: DMatrix<f64> = &u * v.transpose() * 3.0;

    let mask = DMatrix::from_fn(40, 30, |_, _| rng.random::<f64>() > 0.3);
    let xhat = MaskedMatrix::new(truth.clone(), mask)?;
    println!(
        "observed {:.0}% of {} entries",
        100.0 * xhat.observed_fraction(),
        truth.len()
    );

    let baseline = mean_impute(&xhat);
    println!(
        "mean imputation rel. error: {:.4}",
        (&baseline - &truth).norm() / truth.norm()
    );

    for lambda1 in [1.0, 0.1, 0.01] {
        let cfg = CompletionConfig {
            max_inner_iters: 2000,
            inner_tol: 1e-9,
            ..CompletionConfig::with_lambda1(lambda1)
        };
        let out = complete_nuclear_traced(&xhat, &cfg, None)?;
        println!(
            "lambda1 = {lambda1:<5} rel. error {:.2e}  iterations {:4}  objective {:.4} -> {:.4}  (max rise {:.1e})",
            (&out.matrix - &truth).norm() / truth.norm(),
            out.iterations,
            out.objective_trace[0],
            out.objective_trace.last().unwrap(),
            out.max_objective_increase(),
        );
    }
    Ok(())
}
