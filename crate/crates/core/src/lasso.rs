//! LASSO by cyclic coordinate descent, plus the pseudoinverse warm start.
//!
//! The objective is `‖Xβ − y‖²₂ + λ₂‖β‖₁` with no ½ and no `1/m` factor.
//! Most libraries scale differently; here the per-coordinate soft threshold is
//! `λ₂/2` and every coefficient is zero once `λ₂ ≥ 2‖Xᵀy‖_∞`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::MaskedMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RCOND: f64 = 1e-10;

/// A weight vector and the indices of its numerically nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    beta: DVector<f64>,
    support: Vec<usize>,
    support_tol: f64,
}

impl SparseWeights {
    pub fn new(beta: DVector<f64>, support_tol: f64) -> Self {
        let support = support_of(&beta, support_tol);
        Self {
            beta,
            support,
            support_tol,
        }
    }

    pub fn zeros(n: usize, support_tol: f64) -> Self {
        Self::new(DVector::zeros(n), support_tol)
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn into_beta(self) -> DVector<f64> {
        self.beta
    }

    /// Sorted ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_tol(&self) -> f64 {
        self.support_tol
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

fn support_of(beta: &DVector<f64>, tol: f64) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > tol)
        .map(|(i, _)| i)
        .collect()
}

/// `{i : |βᵢ| > support_tol}`, ascending.
pub fn extract_support(w: &SparseWeights) -> Vec<usize> {
    support_of(&w.beta, w.support_tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig {
    /// ℓ₁ weight λ₂.
    pub lambda2: f64,
    /// Stop once a full sweep moves no coordinate by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
    pub support_tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda2: 1.0,
            tol: 1e-7,
            max_sweeps: 10_000,
            support_tol: 1e-8,
        }
    }
}

impl LassoConfig {
    pub fn with_lambda2(lambda2: f64) -> Self {
        Self {
            lambda2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda2 must be finite and nonnegative, got {}",
                self.lambda2
            )));
        }
        if !(self.tol > 0.0) || !(self.support_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "tol and support_tol must be positive".into(),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub weights: SparseWeights,
    pub sweeps: usize,
    /// False when `max_sweeps` ran out first; `weights` is then the last iterate.
    pub converged: bool,
    pub objective: f64,
}

/// `‖Xβ − y‖² + λ₂‖β‖₁`.
pub fn lasso_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda2: f64,
) -> f64 {
    (x * beta - y).norm_squared() + lambda2 * beta.lp_norm(1)
}

/// Smallest λ₂ for which the zero vector is optimal: `2‖Xᵀy‖_∞`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    2.0 * x.tr_mul(y).amax()
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent. Zero-norm columns keep a zero weight.
pub fn lasso_cd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &LassoConfig,
    warm_start: Option<&DVector<f64>>,
) -> Result<LassoFit> {
    cfg.validate()?;
    let (m, n) = x.shape();
    if y.len() != m {
        return Err(Error::dims("lasso_cd labels", m, y.len()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso_cd"));
    }

    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let mut beta = match warm_start {
        Some(w) if w.len() != n => return Err(Error::dims("lasso_cd warm start", n, w.len())),
        Some(w) if w.iter().any(|v| !v.is_finite()) => {
            return Err(Error::NonFinite("lasso_cd warm start"))
        }
        Some(w) => w.clone(),
        None => DVector::zeros(n),
    };
    for (j, &sq) in col_sq.iter().enumerate() {
        if sq == 0.0 {
            beta[j] = 0.0;
        }
    }

    // zero is the global minimizer once λ₂ reaches 2‖Xᵀy‖_∞
    if n == 0 || cfg.lambda2 >= lambda_max(x, y) {
        let beta = DVector::zeros(n);
        return Ok(LassoFit {
            objective: y.norm_squared(),
            weights: SparseWeights::new(beta, cfg.support_tol),
            sweeps: 0,
            converged: true,
        });
    }

    let half_lambda = cfg.lambda2 / 2.0;
    let mut residual = y - x * &beta;
    let mut objective = residual.norm_squared() + cfg.lambda2 * beta.lp_norm(1);
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..n {
            let sq = col_sq[j];
            if sq == 0.0 {
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            let rho = col.dot(&residual) + sq * old;
            let new = soft_threshold(rho, half_lambda) / sq;
            let delta = new - old;
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }

        let next = residual.norm_squared() + cfg.lambda2 * beta.lp_norm(1);
        debug_assert!(
            next <= objective + 1e-10 * objective.abs().max(1.0),
            "lasso objective increased in sweep {sweeps}: {objective} -> {next}"
        );
        objective = next;

        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(LassoFit {
        weights: SparseWeights::new(beta, cfg.support_tol),
        sweeps,
        converged,
        objective,
    })
}

/// Minimum-norm least-squares solution `X⁺y` via SVD.
pub fn pseudoinverse_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = x.shape();
    if y.len() != m {
        return Err(Error::dims("pseudoinverse labels", m, y.len()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pseudoinverse"));
    }
    if m == 0 || n == 0 {
        return Ok(DVector::zeros(n));
    }
    let (u, sigma, v_t) = crate::svd::thin_svd(x)?;
    let cutoff = PINV_RCOND * sigma.max();
    let mut coeffs = u.tr_mul(y);
    for (c, &s) in coeffs.iter_mut().zip(sigma.iter()) {
        *c = if s > cutoff && s > 0.0 { *c / s } else { 0.0 };
    }
    Ok(v_t.tr_mul(&coeffs))
}

/// Pseudoinverse of the zero-filled design applied to `y`.
pub fn pseudoinverse_init(xhat: &MaskedMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    pseudoinverse_solve(xhat.values(), y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudoinverse_examples() {
        let eye = MaskedMatrix::fully_observed(DMatrix::identity(3, 3));
        let y = DVector::from_vec(vec![1.5, -2.0, 7.0]);
        assert!((pseudoinverse_init(&eye, &y).unwrap() - &y).norm() < 1e-14);

        let deficient =
            MaskedMatrix::fully_observed(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let out = pseudoinverse_init(&deficient, &DVector::from_vec(vec![4.0, 5.0])).unwrap();
        assert!((out - DVector::from_vec(vec![2.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn pseudoinverse_zero_fills_missing_entries() {
        let xhat = MaskedMatrix::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[true, false, true, true]),
        )
        .unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let out = pseudoinverse_init(&xhat, &y).unwrap();
        assert!((out - y).norm() < 1e-12);
    }

    #[test]
    fn pseudoinverse_rejects_bad_labels() {
        let x = MaskedMatrix::fully_observed(DMatrix::identity(2, 2));
        assert!(pseudoinverse_init(&x, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn lasso_unregularized_limit() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let fit = lasso_cd(&x, &y, &LassoConfig::with_lambda2(0.0), None).unwrap();
        let exact = x.clone().lu().solve(&y).unwrap();
        assert!(fit.converged);
        assert!((fit.weights.beta() - exact).amax() < 1e-6);
    }

    #[test]
    fn lasso_full_shrinkage() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -2.0, 1.0, 0.3, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let lam = lambda_max(&x, &y);
        let fit = lasso_cd(
            &x,
            &y,
            &LassoConfig::with_lambda2(lam),
            Some(&DVector::from_vec(vec![3.0, -1.0])),
        )
        .unwrap();
        assert!(fit.weights.beta().iter().all(|&b| b == 0.0));
        assert!(fit.weights.support().is_empty());
        assert!(fit.converged);
    }

    #[test]
    fn lasso_scalar_matches_grid() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = DVector::from_vec(vec![2.0, 0.0]);
        let fit = lasso_cd(&x, &y, &LassoConfig::with_lambda2(1.0), None).unwrap();
        // (β − 2)² + |β| on a fine grid
        let grid = (0..=40_000)
            .map(|k| -1.0 + k as f64 * 1e-4)
            .min_by(|a, b| {
                let f = |t: f64| (t - 2.0).powi(2) + t.abs();
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((grid - 1.5).abs() < 1e-4);
        assert!((fit.weights.beta()[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn zero_columns_stay_zero() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let fit = lasso_cd(
            &x,
            &y,
            &LassoConfig::with_lambda2(0.1),
            Some(&DVector::from_vec(vec![0.0, 5.0])),
        )
        .unwrap();
        assert_eq!(fit.weights.beta()[1], 0.0);
    }

    #[test]
    fn exhausted_sweeps_flagged() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.99, 1.0, 1.01, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let cfg = LassoConfig {
            max_sweeps: 1,
            tol: 1e-14,
            ..LassoConfig::with_lambda2(0.0)
        };
        let fit = lasso_cd(&x, &y, &cfg, None).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.sweeps, 1);
        assert!(fit.objective <= lasso_objective(&x, &y, &DVector::zeros(2), 0.0));
    }

    #[test]
    fn lasso_input_errors() {
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(lasso_cd(&x, &DVector::zeros(3), &LassoConfig::default(), None).is_err());
        let y = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert!(matches!(
            lasso_cd(&x, &y, &LassoConfig::default(), None),
            Err(Error::NonFinite(_))
        ));
        let cfg = LassoConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(lasso_cd(&x, &DVector::zeros(2), &cfg, None).is_err());
    }

    #[test]
    fn support_extraction() {
        let w = SparseWeights::zeros(4, 1e-10);
        assert!(extract_support(&w).is_empty());
        let w = SparseWeights::new(DVector::from_vec(vec![0.0, 3.2, -1e-14, 0.5]), 1e-10);
        assert_eq!(extract_support(&w), vec![1, 3]);
        assert_eq!(w.support(), &[1, 3]);
    }
}
