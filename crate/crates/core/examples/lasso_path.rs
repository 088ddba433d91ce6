//! Coordinate-descent LASSO along a decreasing λ₂ path, warm-started.

use covsparse::lasso::{lambda_max, lasso_objective};
use covsparse::{lasso_cd, LassoConfig};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> covsparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(60, 12, |_, _| StandardNormal.sample(&mut rng));
    let mut beta_true = DVector::zeros(12);
    beta_true[2] = 1.5;
    beta_true[7] = -2.0;
    beta_true[9] = 0.8;
    let y = &x * &beta_true;

    let top = lambda_max(&x, &y);
    println!("lambda_max = {top:.3} (all weights vanish at or above this)");

    let mut warm: Option<DVector<f64>> = None;
    for fraction in [1.0, 0.5, 0.2, 0.05, 0.01, 0.001] {
        let cfg = LassoConfig::with_lambda2(fraction * top);
        let fit = lasso_cd(&x, &y, &cfg, warm.as_ref())?;
        println!(
            "lambda2 = {:8.3}  sweeps {:4}  objective {:10.4}  support {:?}",
            cfg.lambda2,
            fit.sweeps,
            lasso_objective(&x, &y, fit.weights.beta(), cfg.lambda2),
            fit.weights.support(),
        );
        warm = Some(fit.weights.into_beta());
    }
    println!("true support: [2, 7, 9]");
    Ok(())
}
