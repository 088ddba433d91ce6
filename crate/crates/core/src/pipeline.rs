//! Four-step recovery and its covariance-augmented variant.
//!
//! Both algorithms run two alternating completion/LASSO phases. Phase 1 works
//! on the full design with a loose stopping threshold `epsilon` and yields a
//! support `S`. Phase 2 re-solves on `X̂` restricted to a column set with the
//! tighter threshold `alpha`, and the weights are re-embedded into length `n`.
//!
//! The plain algorithm restricts phase 2 to `S`. The modified algorithm first
//! normalizes the phase-1 completed matrix, forms `C = XᵀX`, and adds every
//! column whose correlation with some member of `S` exceeds `gamma`.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::completion::{run_completion, CompletionConfig};
use crate::error::{Error, Result};
use crate::lasso::{lasso_cd, pseudoinverse_init, LassoConfig, SparseWeights};
use crate::matrix::{empirical_covariance, normalize_columns_with, CovarianceMatrix, MaskedMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Phase-1 threshold on `‖β_k − β_{k+1}‖₂`.
    pub epsilon: f64,
    /// Phase-2 threshold; at most `epsilon / 10`.
    pub alpha: f64,
    /// Correlation threshold for support augmentation, in `[0, 1]`.
    pub gamma: f64,
    pub completion: CompletionConfig,
    pub lasso: LassoConfig,
    /// Outer-iteration cap, applied to each phase separately.
    pub max_outer_iters: usize,
    /// Compare signed correlations against `gamma` instead of magnitudes.
    pub signed_correlation: bool,
    /// Mean-center columns before normalizing them for the covariance.
    pub center_columns: bool,
    /// λ₂ for phase 2; `None` reuses `lasso.lambda2`.
    pub phase2_lambda2: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::new(
            1e-3,
            0.5,
            CompletionConfig::default(),
            LassoConfig::default(),
        )
    }
}

impl PipelineConfig {
    /// Builds a config with `alpha = epsilon / 100` and 50 outer iterations per phase.
    pub fn new(epsilon: f64, gamma: f64, completion: CompletionConfig, lasso: LassoConfig) -> Self {
        Self {
            epsilon,
            alpha: epsilon / 100.0,
            gamma,
            completion,
            lasso,
            max_outer_iters: 50,
            signed_correlation: false,
            center_columns: false,
            phase2_lambda2: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0) || self.alpha > self.epsilon / 10.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive and at most epsilon/10 ({}), got {}",
                self.epsilon / 10.0,
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidConfig(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        if let Some(l) = self.phase2_lambda2 {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "phase2_lambda2 must be nonnegative, got {l}"
                )));
            }
        }
        self.completion.validate()?;
        self.lasso.validate()
    }

    fn phase2_lasso(&self) -> LassoConfig {
        LassoConfig {
            lambda2: self.phase2_lambda2.unwrap_or(self.lasso.lambda2),
            ..self.lasso.clone()
        }
    }
}

/// Result of one alternating completion/LASSO loop.
#[derive(Debug, Clone)]
pub struct Alternation {
    pub completed: DMatrix<f64>,
    pub weights: SparseWeights,
    pub iterations: usize,
    pub converged: bool,
    /// `‖β_k − β_{k+1}‖₂` at the last iteration.
    pub last_change: f64,
}

/// Alternates warm-started completion steps with a warm-started LASSO refit
/// until consecutive weight vectors are within `stop_tol`.
///
/// Each outer iteration advances the completion by at most
/// `cfg.completion.max_inner_iters` proximal steps. The loop always runs at
/// least once so that a completed matrix exists.
pub fn alternate_minimize(
    xhat: &MaskedMatrix,
    y: &DVector<f64>,
    cfg: &PipelineConfig,
    stop_tol: f64,
) -> Result<Alternation> {
    cfg.validate()?;
    alternate(
        xhat,
        y,
        &cfg.completion,
        &cfg.lasso,
        cfg.max_outer_iters,
        stop_tol,
    )
}

fn alternate(
    xhat: &MaskedMatrix,
    y: &DVector<f64>,
    completion: &CompletionConfig,
    lasso: &LassoConfig,
    max_outer_iters: usize,
    stop_tol: f64,
) -> Result<Alternation> {
    if !(stop_tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "stop tolerance must be positive, got {stop_tol}"
        )));
    }
    if y.len() != xhat.nrows() {
        return Err(Error::dims(
            "alternate_minimize labels",
            xhat.nrows(),
            y.len(),
        ));
    }

    let mut beta = pseudoinverse_init(xhat, y)?;
    let mut completed: Option<DMatrix<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    while iterations < max_outer_iters {
        iterations += 1;
        let x =
            run_completion(xhat, completion, completed.as_ref(), cfg!(debug_assertions))?.matrix;
        let fit = lasso_cd(&x, y, lasso, Some(&beta))?;
        let next = fit.weights.into_beta();
        last_change = (&next - &beta).norm();
        beta = next;
        completed = Some(x);
        if last_change <= stop_tol {
            converged = true;
            break;
        }
    }

    Ok(Alternation {
        completed: completed.expect("loop runs at least once"),
        weights: SparseWeights::new(beta, lasso.support_tol),
        iterations,
        converged,
        last_change,
    })
}

/// A column subset of a masked matrix with the original column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfinedMatrix {
    pub matrix: MaskedMatrix,
    /// Original index of each retained column, ascending.
    pub columns: Vec<usize>,
}

/// Restricts `xhat` (values and mask) to the columns in `s`, ascending.
pub fn confine_columns(xhat: &MaskedMatrix, s: &[usize]) -> Result<ConfinedMatrix> {
    if s.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut columns = s.to_vec();
    columns.sort_unstable();
    columns.dedup();
    let matrix = xhat.select_columns(&columns)?;
    Ok(ConfinedMatrix { matrix, columns })
}

/// `Ŝ = S ∪ {j ∉ S : |C[i][j]| > γ for some i ∈ S, j not degenerate}`.
pub fn augment_support(
    s: &[usize],
    c: &CovarianceMatrix,
    gamma: f64,
    degenerate: &[bool],
) -> Result<Vec<usize>> {
    augment_support_with(s, c, gamma, degenerate, false)
}

/// [`augment_support`] with a choice between magnitude and signed comparison.
///
/// Correlations are capped at 1 before comparing, so round-off on duplicate
/// columns never lets `γ = 1` admit anything.
pub fn augment_support_with(
    s: &[usize],
    c: &CovarianceMatrix,
    gamma: f64,
    degenerate: &[bool],
    signed: bool,
) -> Result<Vec<usize>> {
    let n = c.n();
    if degenerate.len() != n {
        return Err(Error::dims(
            "augment_support degeneracy flags",
            n,
            degenerate.len(),
        ));
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let mut in_set = vec![false; n];
    for &i in s {
        in_set[i] = true;
    }
    let mut out: Vec<usize> = Vec::with_capacity(s.len());
    for j in 0..n {
        if in_set[j] {
            out.push(j);
            continue;
        }
        if degenerate[j] {
            continue;
        }
        let correlated = s.iter().any(|&i| {
            let v = c.get(i, j);
            let score = if signed { v } else { v.abs() };
            score.min(1.0) > gamma
        });
        if correlated {
            out.push(j);
        }
    }
    Ok(out)
}

/// Scatters `beta_confined` into a length-`n` vector at `s_hat`, zero elsewhere.
pub fn embed_beta(beta_confined: &DVector<f64>, s_hat: &[usize], n: usize) -> Result<DVector<f64>> {
    if beta_confined.len() != s_hat.len() {
        return Err(Error::dims("embed_beta", s_hat.len(), beta_confined.len()));
    }
    let mut out = DVector::zeros(n);
    for (k, &idx) in s_hat.iter().enumerate() {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
        out[idx] = beta_confined[k];
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Length-`n` weights, zero outside `support_augmented`.
    pub weights: SparseWeights,
    pub support_phase1: Vec<usize>,
    /// Equal to `support_phase1` for the plain algorithm.
    pub support_augmented: Vec<usize>,
    /// Phase-2 completed matrix over the `support_augmented` columns.
    pub completed_confined: DMatrix<f64>,
    pub outer_iters_phase1: usize,
    pub outer_iters_phase2: usize,
    pub converged_phase1: bool,
    pub converged_phase2: bool,
    pub phase1_time: Duration,
    /// Normalization, covariance and augmentation; zero for the plain algorithm.
    pub augment_time: Duration,
    pub phase2_time: Duration,
    pub wall_time: Duration,
}

impl RecoveryResult {
    pub fn beta(&self) -> &DVector<f64> {
        self.weights.beta()
    }

    pub fn converged(&self) -> bool {
        self.converged_phase1 && self.converged_phase2
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::dims("predict", self.weights.len(), x.ncols()));
        }
        Ok(x * self.weights.beta())
    }

    /// Equality of every estimate, ignoring timing fields.
    pub fn same_estimate(&self, other: &Self) -> bool {
        self.weights == other.weights
            && self.support_phase1 == other.support_phase1
            && self.support_augmented == other.support_augmented
            && self.completed_confined == other.completed_confined
            && self.outer_iters_phase1 == other.outer_iters_phase1
            && self.outer_iters_phase2 == other.outer_iters_phase2
            && self.converged_phase1 == other.converged_phase1
            && self.converged_phase2 == other.converged_phase2
    }
}

/// Algorithm 1: phase 1, support, confinement to `S`, phase 2, re-embedding.
pub fn four_step_recovery(
    xhat: &MaskedMatrix,
    y: &DVector<f64>,
    cfg: &PipelineConfig,
) -> Result<RecoveryResult> {
    recover(xhat, y, cfg, false)
}

/// Algorithm 2: as [`four_step_recovery`], with `S` widened by the
/// covariance of the normalized phase-1 completion before confinement.
pub fn modified_four_step_recovery(
    xhat: &MaskedMatrix,
    y: &DVector<f64>,
    cfg: &PipelineConfig,
) -> Result<RecoveryResult> {
    recover(xhat, y, cfg, true)
}

/// Runs phase 1 only and returns the covariance of the normalized completion
/// together with the degeneracy flags.
pub fn phase1_covariance(
    xhat: &MaskedMatrix,
    y: &DVector<f64>,
    cfg: &PipelineConfig,
) -> Result<(CovarianceMatrix, Vec<bool>)> {
    let phase1 = alternate_minimize(xhat, y, cfg, cfg.epsilon)?;
    let normalized = normalize_columns_with(&phase1.completed, cfg.center_columns);
    Ok((
        empirical_covariance(&normalized.matrix),
        normalized.degenerate,
    ))
}

fn recover(
    xhat: &MaskedMatrix,
    y: &DVector<f64>,
    cfg: &PipelineConfig,
    augment: bool,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let n = xhat.ncols();
    let start = Instant::now();

    let phase1 = alternate(
        xhat,
        y,
        &cfg.completion,
        &cfg.lasso,
        cfg.max_outer_iters,
        cfg.epsilon,
    )?;
    let support_phase1 = phase1.weights.support().to_vec();
    if support_phase1.is_empty() {
        return Err(Error::EmptySupport);
    }
    let phase1_time = start.elapsed();

    let augment_start = Instant::now();
    let support_augmented = if augment {
        let normalized = normalize_columns_with(&phase1.completed, cfg.center_columns);
        let cov = empirical_covariance(&normalized.matrix);
        augment_support_with(
            &support_phase1,
            &cov,
            cfg.gamma,
            &normalized.degenerate,
            cfg.signed_correlation,
        )?
    } else {
        support_phase1.clone()
    };
    let augment_time = if augment {
        augment_start.elapsed()
    } else {
        Duration::ZERO
    };

    let phase2_start = Instant::now();
    let confined = confine_columns(xhat, &support_augmented)?;
    let phase2 = alternate(
        &confined.matrix,
        y,
        &cfg.completion,
        &cfg.phase2_lasso(),
        cfg.max_outer_iters,
        cfg.alpha,
    )?;
    let beta = embed_beta(phase2.weights.beta(), &confined.columns, n)?;
    let phase2_time = phase2_start.elapsed();

    Ok(RecoveryResult {
        weights: SparseWeights::new(beta, cfg.lasso.support_tol),
        support_phase1,
        support_augmented: confined.columns,
        completed_confined: phase2.completed,
        outer_iters_phase1: phase1.iterations,
        outer_iters_phase2: phase2.iterations,
        converged_phase1: phase1.converged,
        converged_phase2: phase2.converged,
        phase1_time,
        augment_time,
        phase2_time,
        wall_time: start.elapsed(),
    })
}
