//! Problem generation and ingestion.
//!
//! Every generator and splitter here is a pure function of its inputs and an
//! explicit seed. Missingness is MCAR: each entry is dropped independently.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{format_sig, MaskedMatrix};

/// Significant digits used when writing datasets.
pub const CSV_DIGITS: usize = 12;

/// Labels `y`, a masked design `X̂`, and the ground truth when it is known.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub design: MaskedMatrix,
    pub labels: DVector<f64>,
    pub beta_true: Option<DVector<f64>>,
    pub x_true: Option<DMatrix<f64>>,
}

impl RegressionProblem {
    pub fn new(design: MaskedMatrix, labels: DVector<f64>) -> Result<Self> {
        if design.nrows() != labels.len() {
            return Err(Error::dims(
                "RegressionProblem labels",
                design.nrows(),
                labels.len(),
            ));
        }
        Ok(Self {
            design,
            labels,
            beta_true: None,
            x_true: None,
        })
    }

    pub fn nrows(&self) -> usize {
        self.design.nrows()
    }

    pub fn nfeatures(&self) -> usize {
        self.design.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Training rows.
    pub m: usize,
    pub n: usize,
    /// Number of nonzero true weights.
    pub sparsity: usize,
    /// Rank of the design before block mixing; `None` keeps the Gaussian design full rank.
    #[serde(default)]
    pub rank: Option<usize>,
    /// Within-block population correlation ρ.
    #[serde(default)]
    pub block_corr: f64,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    #[serde(default)]
    pub miss_rate: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fully observed rows generated alongside the training rows; defaults to `m`.
    #[serde(default)]
    pub test_rows: Option<usize>,
}

fn default_block_size() -> usize {
    1
}

impl SyntheticSpec {
    pub fn new(m: usize, n: usize, sparsity: usize) -> Self {
        Self {
            m,
            n,
            sparsity,
            rank: None,
            block_corr: 0.0,
            block_size: 1,
            miss_rate: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            test_rows: None,
        }
    }

    pub fn test_rows(&self) -> usize {
        self.test_rows.unwrap_or(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 {
            return bad("m and n must be positive".into());
        }
        if self.sparsity > self.n {
            return bad(format!("sparsity {} exceeds n = {}", self.sparsity, self.n));
        }
        if let Some(r) = self.rank {
            if r == 0 || r > (self.m + self.test_rows()).min(self.n) {
                return bad(format!("rank {r} must lie in [1, min(rows, n)]"));
            }
        }
        if !(0.0..1.0).contains(&self.block_corr) {
            return bad(format!(
                "block_corr must lie in [0, 1), got {}",
                self.block_corr
            ));
        }
        if self.block_size == 0 {
            return bad("block_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.miss_rate) {
            return bad(format!(
                "miss_rate must lie in [0, 1), got {}",
                self.miss_rate
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, label_column: String },
}

/// A training problem plus fully observed holdout rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problem: RegressionProblem,
    pub test_x: DMatrix<f64>,
    pub test_y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub provenance: Provenance,
    /// Rows dropped at ingestion because their label was missing.
    pub dropped_label_rows: usize,
}

impl Dataset {
    pub fn train_rows(&self) -> usize {
        self.problem.nrows()
    }

    pub fn test_rows(&self) -> usize {
        self.test_x.nrows()
    }

    pub fn nfeatures(&self) -> usize {
        self.problem.nfeatures()
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws `X`, a sparse `β`, noisy labels and an MCAR mask on the training rows.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n) = (spec.m, spec.n);
    let total = m + spec.test_rows();

    let mut x = DMatrix::from_fn(total, n, |_, _| 0.0);
    for i in 0..total {
        for j in 0..n {
            x[(i, j)] = gaussian(&mut rng);
        }
    }

    if let Some(r) = spec.rank {
        if r < total.min(n) {
            let (u, sigma, v_t) = crate::svd::thin_svd(&x)?;
            let mut left = u.columns(0, r).into_owned();
            for k in 0..r {
                left.column_mut(k).scale_mut(sigma[k]);
            }
            x = left * v_t.rows(0, r);
        }
    }

    if spec.block_corr > 0.0 && spec.block_size > 1 {
        let shared = spec.block_corr.sqrt();
        let own = (1.0 - spec.block_corr).sqrt();
        for i in 0..total {
            for start in (0..n).step_by(spec.block_size) {
                let g = gaussian(&mut rng);
                for j in start..(start + spec.block_size).min(n) {
                    x[(i, j)] = shared * g + own * x[(i, j)];
                }
            }
        }
    }

    let mut positions = rand::seq::index::sample(&mut rng, n, spec.sparsity).into_vec();
    positions.sort_unstable();
    let mut beta = DVector::zeros(n);
    for &p in &positions {
        let magnitude = rng.random_range(1.0..=2.0);
        beta[p] = if rng.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        };
    }

    let mut y = &x * &beta;
    if spec.noise_sigma > 0.0 {
        for v in y.iter_mut() {
            *v += spec.noise_sigma * gaussian(&mut rng);
        }
    }

    let mut mask = DMatrix::from_element(m, n, true);
    if spec.miss_rate > 0.0 {
        for j in 0..n {
            for i in 0..m {
                mask[(i, j)] = !rng.random_bool(spec.miss_rate);
            }
        }
    }

    let train_x = x.rows(0, m).into_owned();
    let design = MaskedMatrix::new(train_x.clone(), mask)?;
    let problem = RegressionProblem {
        design,
        labels: y.rows(0, m).into_owned(),
        beta_true: Some(beta),
        x_true: Some(train_x),
    };
    Ok(Dataset {
        problem,
        test_x: x.rows(m, total - m).into_owned(),
        test_y: y.rows(m, total - m).into_owned(),
        feature_names: (0..n).map(|j| format!("x{j}")).collect(),
        label_name: "y".into(),
        provenance: Provenance::Synthetic(spec.clone()),
        dropped_label_rows: 0,
    })
}

fn is_missing_token(tok: &str) -> bool {
    tok.is_empty() || tok.eq_ignore_ascii_case("na") || tok.eq_ignore_ascii_case("nan")
}

/// Reads a comma-separated numeric table. Empty cells, `NA` and `NaN` are
/// missing. Rows whose label is missing are dropped and counted.
///
/// Without a header, columns are named `col0, col1, ...`; a bare index such
/// as `"2"` also selects the label column.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut names: Vec<String> = if header {
        reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };

    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = idx + 1 + usize::from(header);
        if names.is_empty() {
            names = (0..record.len()).map(|j| format!("col{j}")).collect();
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            if is_missing_token(cell) {
                row.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Ingest {
                    path: path.to_path_buf(),
                    row: line,
                    column: col + 1,
                    message: format!("unparseable cell {cell:?}"),
                })?;
                if v.is_nan() {
                    row.push(None);
                } else if !v.is_finite() {
                    return Err(Error::Ingest {
                        path: path.to_path_buf(),
                        row: line,
                        column: col + 1,
                        message: format!("non-finite value {cell:?}"),
                    });
                } else {
                    row.push(Some(v));
                }
            }
        }
        rows.push(row);
    }

    let label_idx = names
        .iter()
        .position(|n| n == label_column)
        .or_else(|| {
            label_column
                .parse::<usize>()
                .ok()
                .filter(|&i| i < names.len())
        })
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("label column {label_column:?} not found"),
        })?;

    let feature_cols: Vec<usize> = (0..names.len()).filter(|&j| j != label_idx).collect();
    let kept: Vec<&Vec<Option<f64>>> = rows.iter().filter(|r| r[label_idx].is_some()).collect();
    let dropped = rows.len() - kept.len();
    let (m, p) = (kept.len(), feature_cols.len());

    let values = DMatrix::from_fn(m, p, |i, j| kept[i][feature_cols[j]].unwrap_or(0.0));
    let mask = DMatrix::from_fn(m, p, |i, j| kept[i][feature_cols[j]].is_some());
    let labels = DVector::from_fn(m, |i, _| kept[i][label_idx].expect("filtered"));

    Ok(Dataset {
        problem: RegressionProblem::new(MaskedMatrix::new(values, mask)?, labels)?,
        test_x: DMatrix::zeros(0, p),
        test_y: DVector::zeros(0),
        feature_names: feature_cols.iter().map(|&j| names[j].clone()).collect(),
        label_name: names[label_idx].clone(),
        provenance: Provenance::Csv {
            path: path.to_path_buf(),
            label_column: label_column.to_string(),
        },
        dropped_label_rows: dropped,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let (row, column) = match e.position() {
        Some(p) => (p.line() as usize, 0),
        None => (0, 0),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Ingest {
            path: path.to_path_buf(),
            row,
            column,
            message: format!("{kind:?}"),
        },
    }
}

fn write_table(
    path: &Path,
    names: &[String],
    label: &str,
    x: &DMatrix<f64>,
    mask: Option<&DMatrix<bool>>,
    y: &DVector<f64>,
) -> Result<()> {
    let mut out = String::new();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push(label);
    let _ = writeln!(out, "{}", header.join(","));
    for i in 0..x.nrows() {
        let mut cells: Vec<String> = (0..x.ncols())
            .map(|j| match mask {
                Some(m) if !m[(i, j)] => "NA".to_string(),
                _ => format_sig(x[(i, j)], CSV_DIGITS),
            })
            .collect();
        cells.push(format_sig(y[i], CSV_DIGITS));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `train.csv`, `test.csv` and a `meta.txt` sidecar of `key=value` lines.
pub fn save_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_table(
        &dir.join("train.csv"),
        &d.feature_names,
        &d.label_name,
        d.problem.design.values(),
        Some(d.problem.design.mask()),
        &d.problem.labels,
    )?;
    write_table(
        &dir.join("test.csv"),
        &d.feature_names,
        &d.label_name,
        &d.test_x,
        None,
        &d.test_y,
    )?;

    let mut meta = String::new();
    let _ = writeln!(meta, "label={}", d.label_name);
    let _ = writeln!(meta, "train_rows={}", d.train_rows());
    let _ = writeln!(meta, "test_rows={}", d.test_rows());
    let _ = writeln!(meta, "features={}", d.nfeatures());
    match &d.provenance {
        Provenance::Synthetic(s) => {
            let _ = writeln!(meta, "provenance=synthetic");
            let _ = writeln!(meta, "seed={}", s.seed);
            let _ = writeln!(meta, "m={}", s.m);
            let _ = writeln!(meta, "n={}", s.n);
            let _ = writeln!(meta, "sparsity={}", s.sparsity);
            let _ = writeln!(
                meta,
                "rank={}",
                s.rank.map_or("none".into(), |r| r.to_string())
            );
            let _ = writeln!(meta, "block_corr={}", s.block_corr);
            let _ = writeln!(meta, "block_size={}", s.block_size);
            let _ = writeln!(meta, "miss_rate={}", s.miss_rate);
            let _ = writeln!(meta, "noise_sigma={}", s.noise_sigma);
        }
        Provenance::Csv { path, label_column } => {
            let _ = writeln!(meta, "provenance=csv");
            let _ = writeln!(meta, "source={}", path.display());
            let _ = writeln!(meta, "label_column={label_column}");
        }
    }
    if let Some(b) = &d.problem.beta_true {
        let vals: Vec<String> = b.iter().map(|v| format_sig(*v, CSV_DIGITS)).collect();
        let _ = writeln!(meta, "beta_true={}", vals.join(","));
    }
    let meta_path = dir.join("meta.txt");
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

/// Reads a directory written by [`save_dataset`].
pub fn load_saved_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.txt");
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let lookup = |key: &str| {
        meta.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim().to_string())
    };
    let label = lookup("label").unwrap_or_else(|| "y".into());

    let mut d = load_csv(dir.join("train.csv"), &label, true)?;
    let test = load_csv(dir.join("test.csv"), &label, true)?;
    if test.problem.design.observed_count() != test.problem.nrows() * test.nfeatures() {
        return Err(Error::Format {
            path: dir.join("test.csv"),
            message: "test rows must be fully observed".into(),
        });
    }
    d.test_x = test.problem.design.values().clone();
    d.test_y = test.problem.labels;
    if let Some(b) = lookup("beta_true") {
        let parsed: std::result::Result<Vec<f64>, _> =
            b.split(',').map(|t| t.trim().parse()).collect();
        d.problem.beta_true = parsed.ok().map(DVector::from_vec);
    }
    Ok(d)
}

/// Hides each observed training-design entry independently with probability `rate`.
pub fn inject_missingness(d: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!(
            "missingness rate must lie in [0, 1), got {rate}"
        )));
    }
    let mut out = d.clone();
    if rate == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = &d.problem.design;
    let mut mask = design.mask().clone();
    for j in 0..design.ncols() {
        for i in 0..design.nrows() {
            if mask[(i, j)] && rng.random_bool(rate) {
                mask[(i, j)] = false;
            }
        }
    }
    out.problem.design = MaskedMatrix::new(design.values().clone(), mask)?;
    Ok(out)
}

/// Moves a random subset of complete training rows into the test portion.
///
/// The target test size is `round(test_fraction · rows)` (at least one); rows
/// are visited in a seeded random order and only fully observed rows qualify.
pub fn split_train_test(d: &Dataset, test_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let m = d.train_rows();
    if m < 2 {
        return Err(Error::InvalidConfig(
            "need at least two rows to split".into(),
        ));
    }
    let target = ((test_fraction * m as f64).round() as usize).clamp(1, m - 1);

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test: Vec<usize> = order
        .into_iter()
        .filter(|&i| d.problem.design.row_is_complete(i))
        .take(target)
        .collect();
    if test.is_empty() {
        return Err(Error::NoCompleteRows);
    }
    test.sort_unstable();
    let train: Vec<usize> = (0..m).filter(|i| test.binary_search(i).is_err()).collect();

    let design = &d.problem.design;
    let new_test_x = design.values().select_rows(&test);
    let new_test_y = d.problem.labels.select_rows(&test);

    let mut out = d.clone();
    out.problem.design = design.select_rows(&train)?;
    out.problem.labels = d.problem.labels.select_rows(&train);
    out.problem.x_true = d.problem.x_true.as_ref().map(|x| x.select_rows(&train));
    out.test_x = stack_rows(&d.test_x, &new_test_x);
    out.test_y = DVector::from_iterator(
        d.test_y.len() + new_test_y.len(),
        d.test_y.iter().chain(new_test_y.iter()).copied(),
    );
    Ok(out)
}

fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = top.ncols().max(bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), cols);
    if top.nrows() > 0 {
        out.rows_mut(0, top.nrows()).copy_from(top);
    }
    if bottom.nrows() > 0 {
        out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    }
    out
}
