//! Matrix completion.
//!
//! Two completers are provided: [`mean_impute`], a cheap column-mean fill used
//! as a starting point, and [`complete_nuclear`], which minimizes
//!
//! ```text
//! ‖P_E(X − X̂)‖²_F + λ₁‖X‖_*
//! ```
//!
//! by proximal gradient with singular value thresholding. The data term has
//! no ½ factor, so one proximal step with step size `t` is
//!
//! ```text
//! X ← SVT(X − t·P_E(X − X̂), t·λ₁/2)
//! ```
//!
//! which is a descent step for every `t ∈ (0, 1]`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{project_observed, MaskedMatrix};

/// Matrices with both sides below this use a full SVD regardless of `max_rank`.
pub const FULL_SVD_LIMIT: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionConfig {
    /// Nuclear-norm weight λ₁.
    pub lambda1: f64,
    pub step_size: f64,
    pub max_inner_iters: usize,
    /// Relative Frobenius change below which iteration stops.
    pub inner_tol: f64,
    /// Cap on the number of singular triplets kept per thresholding step.
    pub max_rank: Option<usize>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            step_size: 1.0,
            max_inner_iters: 500,
            inner_tol: 1e-6,
            max_rank: None,
        }
    }
}

impl CompletionConfig {
    pub fn with_lambda1(lambda1: f64) -> Self {
        Self {
            lambda1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda1 must be finite and nonnegative, got {}",
                self.lambda1
            )));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "step_size must lie in (0, 1], got {}",
                self.step_size
            )));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "inner_tol must be positive, got {}",
                self.inner_tol
            )));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::InvalidConfig(
                "max_inner_iters must be at least 1".into(),
            ));
        }
        if self.max_rank == Some(0) {
            return Err(Error::InvalidConfig("max_rank must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fills each unobserved entry with the mean of the observed entries in its
/// column, or 0 when the column has none.
pub fn mean_impute(xhat: &MaskedMatrix) -> DMatrix<f64> {
    let mut out = xhat.values().clone();
    for j in 0..xhat.ncols() {
        let (sum, count) = (0..xhat.nrows())
            .filter(|&i| xhat.is_observed(i, j))
            .fold((0.0, 0usize), |(s, c), i| {
                (s + xhat.values()[(i, j)], c + 1)
            });
        let fill = if count > 0 { sum / count as f64 } else { 0.0 };
        for i in 0..xhat.nrows() {
            if !xhat.is_observed(i, j) {
                out[(i, j)] = fill;
            }
        }
    }
    out
}

/// Singular value soft-thresholding: `U · diag(max(σ − τ, 0)) · Vᵀ`.
pub fn svd_soft_threshold(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    Ok(soft_threshold_spectrum(x, tau, None)?.matrix)
}

/// Output of a thresholding step, with the nuclear norm of the result.
#[derive(Debug, Clone)]
pub(crate) struct Thresholded {
    pub matrix: DMatrix<f64>,
    pub nuclear_norm: f64,
}

pub(crate) fn soft_threshold_spectrum(
    x: &DMatrix<f64>,
    tau: f64,
    max_rank: Option<usize>,
) -> Result<Thresholded> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be nonnegative, got {tau}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd_soft_threshold"));
    }
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Ok(Thresholded {
            matrix: x.clone(),
            nuclear_norm: 0.0,
        });
    }

    let (u, sigma, v_t) = match max_rank {
        Some(rank) if m.max(n) >= FULL_SVD_LIMIT && rank < m.min(n) => randomized_svd(x, rank)?,
        _ => full_svd(x)?,
    };

    let keep = max_rank.unwrap_or(usize::MAX).min(sigma.len());
    if tau == 0.0 && keep == sigma.len() && max_rank.is_none() {
        // the proximal map of a zero penalty is the identity
        return Ok(Thresholded {
            matrix: x.clone(),
            nuclear_norm: sigma.sum(),
        });
    }

    let shrunk: Vec<f64> = sigma
        .iter()
        .take(keep)
        .map(|&s| (s - tau).max(0.0))
        .take_while(|&s| s > 0.0)
        .collect();
    let r = shrunk.len();
    if r == 0 {
        return Ok(Thresholded {
            matrix: DMatrix::zeros(m, n),
            nuclear_norm: 0.0,
        });
    }
    let mut left = u.columns(0, r).into_owned();
    for (k, s) in shrunk.iter().enumerate() {
        left.column_mut(k).scale_mut(*s);
    }
    let matrix = left * v_t.rows(0, r);
    Ok(Thresholded {
        matrix,
        nuclear_norm: shrunk.iter().sum(),
    })
}

fn full_svd(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    crate::svd::thin_svd(x)
}

pub(crate) fn singular_values(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    crate::svd::singular_values(x)
}

/// Randomized range finder with power iterations. The sketch is seeded by the
/// matrix shape so results stay deterministic.
fn randomized_svd(
    x: &DMatrix<f64>,
    rank: usize,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    const OVERSAMPLE: usize = 10;
    const POWER_ITERS: usize = 2;
    let (m, n) = x.shape();
    let width = (rank + OVERSAMPLE).min(m.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(((m as u64) << 32) ^ n as u64);
    let omega = DMatrix::from_fn(n, width, |_, _| StandardNormal.sample(&mut rng));

    let mut q = (x * omega).qr().q();
    for _ in 0..POWER_ITERS {
        let z = (x.transpose() * &q).qr().q();
        q = (x * z).qr().q();
    }
    let b = q.transpose() * x;
    let (ub, sigma, v_t) = full_svd(&b)?;
    let keep = rank.min(sigma.len());
    Ok((
        (q * ub).columns(0, keep).into_owned(),
        sigma.rows(0, keep).into_owned(),
        v_t.rows(0, keep).into_owned(),
    ))
}

/// `‖P_E(X − X̂)‖²_F + λ₁‖X‖_*`.
pub fn completion_objective(x: &DMatrix<f64>, xhat: &MaskedMatrix, lambda1: f64) -> Result<f64> {
    let nuclear = if lambda1 == 0.0 {
        0.0
    } else {
        singular_values(x)?.sum()
    };
    Ok(data_misfit(x, xhat)? + lambda1 * nuclear)
}

fn data_misfit(x: &DMatrix<f64>, xhat: &MaskedMatrix) -> Result<f64> {
    if x.shape() != xhat.shape() {
        return Err(Error::dims(
            "completion objective",
            format!("{:?}", xhat.shape()),
            format!("{:?}", x.shape()),
        ));
    }
    Ok(project_observed(&(x - xhat.values()), xhat.mask())?.norm_squared())
}

/// Everything a completion run produced, including the per-iteration objective.
#[derive(Debug, Clone)]
pub struct CompletionOutcome {
    pub matrix: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start point followed by one value per proximal step.
    pub objective_trace: Vec<f64>,
}

impl CompletionOutcome {
    /// Largest increase of the objective between consecutive iterates, or 0.
    pub fn max_objective_increase(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// Nuclear-norm regularized completion; see the module docs for the iteration.
///
/// Starts from `warm_start` when given, otherwise from [`mean_impute`].
pub fn complete_nuclear(
    xhat: &MaskedMatrix,
    cfg: &CompletionConfig,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    Ok(run_completion(xhat, cfg, warm_start, cfg!(debug_assertions))?.matrix)
}

/// [`complete_nuclear`] that also records the objective at every iterate.
pub fn complete_nuclear_traced(
    xhat: &MaskedMatrix,
    cfg: &CompletionConfig,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<CompletionOutcome> {
    run_completion(xhat, cfg, warm_start, true)
}

pub(crate) fn run_completion(
    xhat: &MaskedMatrix,
    cfg: &CompletionConfig,
    warm_start: Option<&DMatrix<f64>>,
    track_objective: bool,
) -> Result<CompletionOutcome> {
    cfg.validate()?;
    let mut x = match warm_start {
        Some(w) if w.shape() != xhat.shape() => {
            return Err(Error::dims(
                "complete_nuclear warm start",
                format!("{:?}", xhat.shape()),
                format!("{:?}", w.shape()),
            ))
        }
        Some(w) => w.clone(),
        None => mean_impute(xhat),
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("complete_nuclear"));
    }

    let step = cfg.step_size;
    let tau = step * cfg.lambda1 / 2.0;
    let mut trace = Vec::new();
    if track_objective {
        trace.push(completion_objective(&x, xhat, cfg.lambda1)?);
    }

    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=cfg.max_inner_iters {
        iterations = iter;
        let residual = project_observed(&(&x - xhat.values()), xhat.mask())?;
        let candidate = &x - residual * step;
        let next = soft_threshold_spectrum(&candidate, tau, cfg.max_rank).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence {
                context: "complete_nuclear",
                iteration: iter,
            },
            other => other,
        })?;
        if next.matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                context: "complete_nuclear",
                iteration: iter,
            });
        }

        if track_objective {
            let obj = data_misfit(&next.matrix, xhat)? + cfg.lambda1 * next.nuclear_norm;
            let prev = *trace.last().expect("trace seeded with start objective");
            debug_assert!(
                cfg.max_rank.is_some() || obj <= prev + 1e-10 * prev.abs().max(1.0),
                "completion objective increased at iteration {iter}: {prev} -> {obj}"
            );
            trace.push(obj);
        }

        let change = (&next.matrix - &x).norm();
        let scale = x.norm();
        x = next.matrix;
        if change <= cfg.inner_tol * scale || change == 0.0 {
            converged = true;
            break;
        }
    }

    Ok(CompletionOutcome {
        matrix: x,
        iterations,
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masked(rows: usize, cols: usize, vals: &[f64], mask: &[bool]) -> MaskedMatrix {
        MaskedMatrix::new(
            DMatrix::from_row_slice(rows, cols, vals),
            DMatrix::from_row_slice(rows, cols, mask),
        )
        .unwrap()
    }

    #[test]
    fn mean_impute_examples() {
        let full =
            MaskedMatrix::fully_observed(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(&mean_impute(&full), full.values());

        let m = masked(
            3,
            2,
            &[1.0, 9.0, 0.0, 9.0, 3.0, 9.0],
            &[true, false, false, false, true, false],
        );
        let out = mean_impute(&m);
        assert_eq!(out[(1, 0)], 2.0);
        assert_eq!(out[(0, 0)], 1.0);
        assert_eq!(
            out.column(1).iter().copied().collect::<Vec<_>>(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn svt_examples() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 4.0, 0.0, 3.0]);
        assert!((svd_soft_threshold(&x, 0.0).unwrap() - &x).norm() < 1e-9);
        let smax = singular_values(&x).unwrap()[0];
        assert_eq!(svd_soft_threshold(&x, smax).unwrap(), DMatrix::zeros(2, 3));

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let out = svd_soft_threshold(&d, 2.0).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!((out - expect).norm() < 1e-12);

        assert!(svd_soft_threshold(&x, -1.0).is_err());
        let mut bad = x.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(
            svd_soft_threshold(&bad, 1.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn truncated_path_keeps_dominant_triplets() {
        let u = DVector::from_fn(600, |i, _| ((i % 7) as f64 - 3.0) / 4.0);
        let v = DVector::from_fn(520, |j, _| ((j % 5) as f64 - 2.0) / 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = DMatrix::from_fn(600, 520, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1e-3 * z
        });
        let x = &u * v.transpose() * 10.0 + noise;
        let full = soft_threshold_spectrum(&x, 0.5, None).unwrap();
        let trunc = soft_threshold_spectrum(&x, 0.5, Some(3)).unwrap();
        let rel = (&full.matrix - &trunc.matrix).norm() / full.matrix.norm();
        assert!(rel < 1e-6, "relative gap {rel}");
    }

    #[test]
    fn completion_fixed_point_without_regularization() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 4.0, 7.0]);
        let m = MaskedMatrix::fully_observed(x.clone());
        let cfg = CompletionConfig::with_lambda1(0.0);
        assert_eq!(complete_nuclear(&m, &cfg, None).unwrap(), x);
    }

    #[test]
    fn completion_of_fully_missing_matrix_is_zero() {
        let m = MaskedMatrix::new(
            DMatrix::from_element(3, 3, 2.0),
            DMatrix::from_element(3, 3, false),
        )
        .unwrap();
        let cfg = CompletionConfig::with_lambda1(1.0);
        assert_eq!(
            complete_nuclear(&m, &cfg, None).unwrap(),
            DMatrix::zeros(3, 3)
        );
    }

    #[test]
    fn rank_one_entry_matches_grid_search() {
        let m = masked(2, 2, &[1.0, 1.0, 1.0, 0.0], &[true, true, true, false]);
        let cfg = CompletionConfig::with_lambda1(1e-3);
        let out = complete_nuclear(&m, &cfg, None).unwrap();

        // grid over the missing entry with the observed ones held at their data
        let objective = |t: f64| {
            let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, t]);
            let s = x.svd(false, false).singular_values;
            1e-3 * s.sum()
        };
        let grid_best = (0..=4000)
            .map(|k| -1.0 + k as f64 * 1e-3)
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap();
        assert!((grid_best - 1.0).abs() < 2e-3);
        assert!(
            (out[(1, 1)] - grid_best).abs() < 0.05,
            "got {}",
            out[(1, 1)]
        );
    }

    #[test]
    fn descent_from_warm_start() {
        let m = masked(
            3,
            3,
            &[1.0, 2.0, 0.0, 2.0, 0.0, 6.0, 0.0, 6.0, 9.0],
            &[true, true, false, true, false, true, false, true, true],
        );
        let cfg = CompletionConfig::with_lambda1(0.5);
        let start = DMatrix::from_element(3, 3, 1.0);
        let out = complete_nuclear_traced(&m, &cfg, Some(&start)).unwrap();
        assert!(out.max_objective_increase() <= 1e-10);
        assert!(out.objective_trace.last().unwrap() <= &out.objective_trace[0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let m = MaskedMatrix::fully_observed(DMatrix::zeros(2, 2));
        for cfg in [
            CompletionConfig {
                step_size: 1.5,
                ..Default::default()
            },
            CompletionConfig {
                step_size: 0.0,
                ..Default::default()
            },
            CompletionConfig {
                inner_tol: 0.0,
                ..Default::default()
            },
            CompletionConfig {
                max_inner_iters: 0,
                ..Default::default()
            },
            CompletionConfig {
                lambda1: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                complete_nuclear(&m, &cfg, None),
                Err(Error::InvalidConfig(_))
            ));
        }
        let wrong = DMatrix::zeros(3, 2);
        assert!(complete_nuclear(&m, &CompletionConfig::default(), Some(&wrong)).is_err());
    }
}
