//! Sparse linear regression when the design matrix has missing entries.
//!
//! The crate pairs nuclear-norm matrix completion with LASSO in two
//! end-to-end procedures: [`four_step_recovery`], which confines a precise
//! second solve to the support found by a cheap first pass, and
//! [`modified_four_step_recovery`], which widens that support with features
//! strongly correlated to it before the second solve.

pub mod bench;
pub mod completion;
pub mod data;
pub mod error;
pub mod lasso;
pub mod matrix;
pub mod pipeline;
mod svd;

pub use completion::{complete_nuclear, mean_impute, svd_soft_threshold, CompletionConfig};
pub use data::{Dataset, RegressionProblem, SyntheticSpec};
pub use error::{Error, Result};
pub use lasso::{extract_support, lasso_cd, pseudoinverse_init, LassoConfig, SparseWeights};
pub use matrix::{
    empirical_covariance, normalize_columns, project_observed, CovarianceMatrix, MaskedMatrix,
};
pub use pipeline::{
    four_step_recovery, modified_four_step_recovery, PipelineConfig, RecoveryResult,
};
