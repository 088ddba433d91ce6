//! Paired benchmark of the two recovery algorithms.
//!
//! For every dataset cell, λ₂ is chosen once with the plain algorithm by
//! validation RMSE over the configured ladder, then both algorithms run at
//! that λ₂ with identical data. Holdout rows are split into a validation part
//! (for the ladder) and a test part (for the reported RMSE).

mod config;
mod report;

use std::path::Path;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{
    BenchConfig, Cell, CsvSource, DatasetConfig, DatasetSource, Ladder, RunSettings, SolverSettings,
};
pub use report::{
    emit_table, structured_path, Algorithm, BenchReport, BenchRow, PairSummary, TableLine,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lasso::lambda_max;
use crate::matrix::CovarianceMatrix;
use crate::pipeline::{
    four_step_recovery, modified_four_step_recovery, phase1_covariance, PipelineConfig,
    RecoveryResult,
};

/// `sqrt(mean((predicted − actual)²))`.
pub fn compute_rmse(predicted: &DVector<f64>, actual: &DVector<f64>) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::dims("compute_rmse", actual.len(), predicted.len()));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidConfig(
            "compute_rmse needs at least one value".into(),
        ));
    }
    Ok(((predicted - actual).norm_squared() / predicted.len() as f64).sqrt())
}

/// Holdout rows split into a validation part and a test part.
#[derive(Debug, Clone)]
pub struct Holdout {
    pub validation_x: DMatrix<f64>,
    pub validation_y: DVector<f64>,
    pub test_x: DMatrix<f64>,
    pub test_y: DVector<f64>,
}

/// Splits the dataset's holdout rows in a seeded random order; both parts get
/// at least one row.
pub fn split_holdout(d: &Dataset, validation_fraction: f64, seed: u64) -> Result<Holdout> {
    let k = d.test_rows();
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least two holdout rows for validation and test, found {k}"
        )));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_4a11));
    let n_val = ((validation_fraction * k as f64).round() as usize).clamp(1, k - 1);
    let (val, test) = order.split_at(n_val);
    let (mut val, mut test) = (val.to_vec(), test.to_vec());
    val.sort_unstable();
    test.sort_unstable();
    Ok(Holdout {
        validation_x: d.test_x.select_rows(&val),
        validation_y: d.test_y.select_rows(&val),
        test_x: d.test_x.select_rows(&test),
        test_y: d.test_y.select_rows(&test),
    })
}

/// Outcome of the λ₂ ladder for one cell.
#[derive(Debug, Clone)]
pub struct Lambda2Choice {
    pub fraction: f64,
    pub lambda2: f64,
    pub validation_rmse: f64,
}

/// Picks the ladder entry with the lowest validation RMSE under the plain
/// algorithm. Ties keep the earlier entry; failing entries are skipped.
pub fn select_lambda2(
    d: &Dataset,
    holdout: &Holdout,
    fractions: &[f64],
    base: &PipelineConfig,
) -> Result<Lambda2Choice> {
    let scale = lambda_max(d.problem.design.values(), &d.problem.labels);
    let mut best: Option<Lambda2Choice> = None;
    let mut last_err = None;
    for &fraction in fractions {
        let mut cfg = base.clone();
        cfg.lasso.lambda2 = fraction * scale;
        match four_step_recovery(&d.problem.design, &d.problem.labels, &cfg) {
            Ok(r) => {
                let rmse = compute_rmse(&r.predict(&holdout.validation_x)?, &holdout.validation_y)?;
                if best.as_ref().is_none_or(|b| rmse < b.validation_rmse) {
                    best = Some(Lambda2Choice {
                        fraction,
                        lambda2: cfg.lasso.lambda2,
                        validation_rmse: rmse,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::EmptySupport))
}

fn timed_pair(
    d: &Dataset,
    cfg: &PipelineConfig,
    repeats: usize,
) -> (
    Result<(RecoveryResult, Duration)>,
    Result<(RecoveryResult, Duration)>,
) {
    let (xhat, y) = (&d.problem.design, &d.problem.labels);
    let mut plain: Vec<Result<RecoveryResult>> = Vec::with_capacity(repeats);
    let mut modified: Vec<Result<RecoveryResult>> = Vec::with_capacity(repeats);
    // interleaved so that drift in machine load hits both sides alike
    for _ in 0..repeats {
        plain.push(four_step_recovery(xhat, y, cfg));
        modified.push(modified_four_step_recovery(xhat, y, cfg));
    }
    (median_run(plain), median_run(modified))
}

fn median_run(runs: Vec<Result<RecoveryResult>>) -> Result<(RecoveryResult, Duration)> {
    let mut ok = Vec::with_capacity(runs.len());
    for r in runs {
        ok.push(r?);
    }
    let mut times: Vec<Duration> = ok.iter().map(|r| r.wall_time).collect();
    times.sort_unstable();
    let median = times[times.len() / 2];
    let first = ok.into_iter().next().expect("at least one repeat");
    Ok((first, median))
}

fn run_cell(cfg: &BenchConfig, cell: &Cell) -> Vec<BenchRow> {
    let lambda1 = cfg.lambda1_for(&cell.dataset_id);
    let gamma = cfg.gamma_for(&cell.dataset_id);
    let failed = |msg: String, lambda2: f64| -> Vec<BenchRow> {
        [Algorithm::FourStep, Algorithm::Modified]
            .into_iter()
            .map(|algorithm| {
                BenchRow::failed(cell, algorithm, lambda1, lambda2, gamma, msg.clone())
            })
            .collect()
    };

    let prepared = (|| -> Result<(Dataset, Holdout, PipelineConfig, Lambda2Choice)> {
        let d = cfg.build_dataset(cell)?;
        let holdout = split_holdout(&d, cfg.run.validation_fraction, cell.seed)?;
        let base = cfg.pipeline_for(&cell.dataset_id, 0.0)?;
        let pinned = cfg
            .dataset
            .get(&cell.dataset_id)
            .and_then(|ds| ds.lambda2_fraction);
        let fractions = match pinned {
            Some(f) => vec![f],
            None => cfg.ladder.lambda2_fraction.clone(),
        };
        let choice = select_lambda2(&d, &holdout, &fractions, &base)?;
        let mut pipeline = base;
        pipeline.lasso.lambda2 = choice.lambda2;
        Ok((d, holdout, pipeline, choice))
    })();
    let (d, holdout, pipeline, choice) = match prepared {
        Ok(p) => p,
        Err(e) => return failed(e.to_string(), f64::NAN),
    };

    let (plain, modified) = timed_pair(&d, &pipeline, cfg.run.repeats);
    [
        (Algorithm::FourStep, plain),
        (Algorithm::Modified, modified),
    ]
    .into_iter()
    .map(|(algorithm, outcome)| {
        let scored = outcome.and_then(|(r, t)| {
            let rmse = compute_rmse(&r.predict(&holdout.test_x)?, &holdout.test_y)?;
            Ok((r, t, rmse))
        });
        match scored {
            Ok((r, wall, rmse)) => BenchRow {
                dataset_id: cell.id(),
                algorithm,
                seed: cell.seed,
                lambda1,
                lambda2: Some(choice.lambda2),
                lambda2_fraction: Some(choice.fraction),
                gamma,
                rmse: Some(rmse),
                validation_rmse: Some(choice.validation_rmse),
                runtime_seconds: Some(wall.as_secs_f64().max(f64::MIN_POSITIVE)),
                phase1_seconds: Some(r.phase1_time.as_secs_f64()),
                augment_seconds: Some(r.augment_time.as_secs_f64()),
                phase2_seconds: Some(r.phase2_time.as_secs_f64()),
                support_size: r.support_phase1.len(),
                augmented_size: r.support_augmented.len(),
                outer_iters_phase1: r.outer_iters_phase1,
                outer_iters_phase2: r.outer_iters_phase2,
                converged: r.converged(),
                error: None,
            },
            Err(e) => BenchRow::failed(
                cell,
                algorithm,
                lambda1,
                choice.lambda2,
                gamma,
                e.to_string(),
            ),
        }
    })
    .collect()
}

/// Runs every cell of `cfg` and assembles the report.
pub fn run_benchmark_config(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let cells = cfg.cells();
    let threads = cfg.run.threads.min(cells.len().max(1));
    let rows: Vec<BenchRow> = if threads <= 1 {
        cells.iter().flat_map(|c| run_cell(cfg, c)).collect()
    } else {
        let mut slots: Vec<Vec<BenchRow>> = vec![Vec::new(); cells.len()];
        let chunk = cells.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (cell_chunk, slot_chunk) in cells.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                scope.spawn(move || {
                    for (cell, slot) in cell_chunk.iter().zip(slot_chunk.iter_mut()) {
                        *slot = run_cell(cfg, cell);
                    }
                });
            }
        });
        slots.into_iter().flatten().collect()
    };
    Ok(BenchReport::from_rows(rows, threads > 1))
}

/// Loads a config file and runs it.
pub fn run_benchmark(config_file: impl AsRef<Path>) -> Result<BenchReport> {
    run_benchmark_config(&BenchConfig::load(config_file)?)
}

/// Writes the covariance of a completed matrix after column normalization.
pub fn export_covariance_matrix(
    completed: &DMatrix<f64>,
    output_path: impl AsRef<Path>,
) -> Result<CovarianceMatrix> {
    let normalized = crate::matrix::normalize_columns(completed);
    let c = crate::matrix::empirical_covariance(&normalized.matrix);
    c.write(output_path)?;
    Ok(c)
}

/// Runs phase 1 for a dataset cell (`"id"` or `"id/trial"`) at its selected λ₂
/// and writes the covariance of the normalized completion.
pub fn export_covariance(
    cfg: &BenchConfig,
    dataset_id: &str,
    output_path: impl AsRef<Path>,
) -> Result<CovarianceMatrix> {
    let cell = cfg.find_cell(dataset_id)?;
    let d = cfg.build_dataset(&cell)?;
    let mut pipeline = cfg.pipeline_for(&cell.dataset_id, 0.0)?;
    let pinned = cfg
        .dataset
        .get(&cell.dataset_id)
        .and_then(|ds| ds.lambda2_fraction);
    pipeline.lasso.lambda2 = match pinned {
        Some(f) => f * lambda_max(d.problem.design.values(), &d.problem.labels),
        None => {
            let holdout = split_holdout(&d, cfg.run.validation_fraction, cell.seed)?;
            select_lambda2(&d, &holdout, &cfg.ladder.lambda2_fraction, &pipeline)?.lambda2
        }
    };
    let (c, _) = phase1_covariance(&d.problem.design, &d.problem.labels, &pipeline)?;
    c.write(output_path)?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(compute_rmse(&a, &a).unwrap(), 0.0);
        let b = DVector::from_vec(vec![0.0, 2.0]);
        assert!((compute_rmse(&a, &b).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(compute_rmse(&a, &DVector::zeros(3)).is_err());
        assert!(compute_rmse(&DVector::zeros(0), &DVector::zeros(0)).is_err());
    }

    #[test]
    fn holdout_split_partitions_rows() {
        let spec = crate::data::SyntheticSpec {
            test_rows: Some(9),
            ..crate::data::SyntheticSpec::new(5, 3, 1)
        };
        let d = crate::data::generate_synthetic(&spec).unwrap();
        let h = split_holdout(&d, 0.5, 1).unwrap();
        assert_eq!(h.validation_y.len() + h.test_y.len(), 9);
        let mut all: Vec<f64> = h
            .validation_y
            .iter()
            .chain(h.test_y.iter())
            .copied()
            .collect();
        let mut orig: Vec<f64> = d.test_y.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
    }
}
