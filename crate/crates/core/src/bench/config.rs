use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::completion::CompletionConfig;
use crate::data::{self, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::lasso::LassoConfig;
use crate::pipeline::PipelineConfig;

/// A benchmark description, read from TOML.
///
/// ```toml
/// [ladder]
/// lambda2_fraction = [0.3, 0.1, 0.03]
/// lambda1 = 5.0
/// gamma = 0.5
///
/// [dataset.corr]
/// source = "synthetic"
/// m = 100
/// n = 200
/// sparsity = 5
/// trials = 20
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub ladder: Ladder,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default)]
    pub dataset: BTreeMap<String, DatasetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    /// λ₂ candidates as fractions of `2‖X̂ᵀy‖_∞` on the zero-filled design.
    pub lambda2_fraction: Vec<f64>,
    pub lambda1: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub epsilon: f64,
    /// Defaults to `epsilon / 100`.
    pub alpha: Option<f64>,
    pub max_outer_iters: usize,
    pub step_size: f64,
    pub max_inner_iters: usize,
    pub inner_tol: f64,
    pub max_rank: Option<usize>,
    pub lasso_tol: f64,
    pub max_sweeps: usize,
    pub support_tol: f64,
    pub signed_correlation: bool,
    pub center_columns: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let c = CompletionConfig::default();
        let l = LassoConfig::default();
        Self {
            epsilon: 1e-3,
            alpha: None,
            max_outer_iters: 50,
            step_size: c.step_size,
            max_inner_iters: c.max_inner_iters,
            inner_tol: c.inner_tol,
            max_rank: c.max_rank,
            lasso_tol: l.tol,
            max_sweeps: l.max_sweeps,
            support_tol: l.support_tol,
            signed_correlation: false,
            center_columns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Share of the holdout rows used to pick λ₂; the rest score the final runs.
    pub validation_fraction: f64,
    /// Timed runs per algorithm; the median wall time is reported.
    pub repeats: usize,
    /// Cells evaluated concurrently. Above 1, timings are flagged as contended.
    pub threads: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            validation_fraction: 0.5,
            repeats: 1,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Number of paired cells; cell `t` uses seed `seed + t`.
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Pins λ₂ (as a fraction) and skips ladder selection.
    #[serde(default)]
    pub lambda2_fraction: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub label: String,
    #[serde(default = "yes")]
    pub header: bool,
    /// Extra MCAR missingness applied after loading.
    #[serde(default)]
    pub inject_missing: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

fn default_test_fraction() -> f64 {
    0.2
}

/// One paired experiment: a dataset id plus the trial index.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dataset_id: String,
    pub trial: usize,
    pub seed: u64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}/{}", self.dataset_id, self.trial)
    }
}

impl BenchConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Reads a config file, resolving relative CSV paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for ds in cfg.dataset.values_mut() {
            if let DatasetSource::Csv(csv) = &mut ds.source {
                if csv.path.is_relative() {
                    csv.path = base.join(&csv.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.ladder.lambda2_fraction.is_empty() {
            return bad("ladder.lambda2_fraction is empty".into());
        }
        if self
            .ladder
            .lambda2_fraction
            .iter()
            .any(|f| !(*f > 0.0 && f.is_finite()))
        {
            return bad("ladder.lambda2_fraction entries must be positive".into());
        }
        if !(self.run.validation_fraction > 0.0 && self.run.validation_fraction < 1.0) {
            return bad("run.validation_fraction must lie in (0, 1)".into());
        }
        if self.run.repeats == 0 || self.run.threads == 0 {
            return bad("run.repeats and run.threads must be at least 1".into());
        }
        for (id, ds) in &self.dataset {
            if id.contains('/') {
                return bad(format!("dataset id {id:?} must not contain '/'"));
            }
            if ds.trials == 0 {
                return bad(format!("dataset {id}: trials must be at least 1"));
            }
            match &ds.source {
                DatasetSource::Synthetic(spec) => spec.validate()?,
                DatasetSource::Csv(c) => {
                    if !(0.0..1.0).contains(&c.inject_missing) {
                        return bad(format!("dataset {id}: inject_missing must lie in [0, 1)"));
                    }
                }
            }
            self.pipeline_for(id, 1.0)?.validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (id, ds) in &self.dataset {
            let base = match &ds.source {
                DatasetSource::Synthetic(s) => s.seed,
                DatasetSource::Csv(c) => c.seed,
            };
            for trial in 0..ds.trials {
                out.push(Cell {
                    dataset_id: id.clone(),
                    trial,
                    seed: base.wrapping_add(trial as u64),
                });
            }
        }
        out
    }

    /// Resolves `"id"` (trial 0) or `"id/trial"`.
    pub fn find_cell(&self, key: &str) -> Result<Cell> {
        let (id, trial) = match key.split_once('/') {
            Some((id, t)) => (
                id,
                t.parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("bad trial index in {key:?}")))?,
            ),
            None => (key, 0),
        };
        self.cells()
            .into_iter()
            .find(|c| c.dataset_id == id && c.trial == trial)
            .ok_or_else(|| Error::InvalidConfig(format!("no dataset cell {key:?} in config")))
    }

    pub fn lambda1_for(&self, id: &str) -> f64 {
        self.dataset
            .get(id)
            .and_then(|d| d.lambda1)
            .unwrap_or(self.ladder.lambda1)
    }

    pub fn gamma_for(&self, id: &str) -> f64 {
        self.dataset
            .get(id)
            .and_then(|d| d.gamma)
            .unwrap_or(self.ladder.gamma)
    }

    /// Pipeline settings for a dataset at an absolute λ₂.
    pub fn pipeline_for(&self, id: &str, lambda2: f64) -> Result<PipelineConfig> {
        let s = &self.solver;
        let completion = CompletionConfig {
            lambda1: self.lambda1_for(id),
            step_size: s.step_size,
            max_inner_iters: s.max_inner_iters,
            inner_tol: s.inner_tol,
            max_rank: s.max_rank,
        };
        let lasso = LassoConfig {
            lambda2,
            tol: s.lasso_tol,
            max_sweeps: s.max_sweeps,
            support_tol: s.support_tol,
        };
        let mut cfg = PipelineConfig::new(s.epsilon, self.gamma_for(id), completion, lasso);
        if let Some(a) = s.alpha {
            cfg.alpha = a;
        }
        cfg.max_outer_iters = s.max_outer_iters;
        cfg.signed_correlation = s.signed_correlation;
        cfg.center_columns = s.center_columns;
        Ok(cfg)
    }

    /// Builds the dataset for a cell: generated, or loaded, masked and split.
    pub fn build_dataset(&self, cell: &Cell) -> Result<Dataset> {
        let ds = self.dataset.get(&cell.dataset_id).ok_or_else(|| {
            Error::InvalidConfig(format!("unknown dataset {:?}", cell.dataset_id))
        })?;
        match &ds.source {
            DatasetSource::Synthetic(spec) => {
                let spec = SyntheticSpec {
                    seed: cell.seed,
                    ..spec.clone()
                };
                data::generate_synthetic(&spec)
            }
            DatasetSource::Csv(c) => {
                let loaded = data::load_csv(&c.path, &c.label, c.header)?;
                let split = data::split_train_test(&loaded, c.test_fraction, cell.seed)?;
                data::inject_missingness(&split, c.inject_missing, cell.seed)
            }
        }
    }
}
