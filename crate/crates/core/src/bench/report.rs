use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Cell;
use crate::error::{Error, Result};
use crate::matrix::format_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FourStep,
    Modified,
}

/// One algorithm run on one dataset cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset_id: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub lambda1: f64,
    /// Absent when the ladder itself failed.
    pub lambda2: Option<f64>,
    pub lambda2_fraction: Option<f64>,
    pub gamma: f64,
    /// Test RMSE; absent for failed runs.
    pub rmse: Option<f64>,
    pub validation_rmse: Option<f64>,
    pub runtime_seconds: Option<f64>,
    pub phase1_seconds: Option<f64>,
    pub augment_seconds: Option<f64>,
    pub phase2_seconds: Option<f64>,
    pub support_size: usize,
    pub augmented_size: usize,
    pub outer_iters_phase1: usize,
    pub outer_iters_phase2: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl BenchRow {
    pub(super) fn failed(
        cell: &Cell,
        algorithm: Algorithm,
        lambda1: f64,
        lambda2: f64,
        gamma: f64,
        error: String,
    ) -> Self {
        Self {
            dataset_id: cell.id(),
            algorithm,
            seed: cell.seed,
            lambda1,
            lambda2: lambda2.is_finite().then_some(lambda2),
            lambda2_fraction: None,
            gamma,
            rmse: None,
            validation_rmse: None,
            runtime_seconds: None,
            phase1_seconds: None,
            augment_seconds: None,
            phase2_seconds: None,
            support_size: 0,
            augmented_size: 0,
            outer_iters_phase1: 0,
            outer_iters_phase2: 0,
            converged: false,
            error: Some(error),
        }
    }

    fn without_timings(&self) -> Self {
        Self {
            runtime_seconds: None,
            phase1_seconds: None,
            augment_seconds: None,
            phase2_seconds: None,
            ..self.clone()
        }
    }
}

/// Side-by-side summary of the two runs of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub dataset_id: String,
    pub rmse_four_step: f64,
    pub rmse_modified: f64,
    pub runtime_four_step: f64,
    pub runtime_modified: f64,
    /// `100·(rmse_four_step − rmse_modified)/rmse_four_step`.
    pub rmse_improvement_percent: f64,
    /// `100·(runtime_modified − runtime_four_step)/runtime_four_step`.
    pub runtime_overhead_percent: f64,
    pub converged: bool,
}

impl PairSummary {
    pub fn new(
        dataset_id: impl Into<String>,
        rmse: (f64, f64),
        runtime: (f64, f64),
        converged: bool,
    ) -> Self {
        let (rmse_four_step, rmse_modified) = rmse;
        let (runtime_four_step, runtime_modified) = runtime;
        Self {
            dataset_id: dataset_id.into(),
            rmse_four_step,
            rmse_modified,
            runtime_four_step,
            runtime_modified,
            rmse_improvement_percent: relative_improvement(rmse_four_step, rmse_modified),
            runtime_overhead_percent: relative_improvement(runtime_four_step, runtime_modified)
                * -1.0,
            converged,
        }
    }
}

/// `100·(baseline − candidate)/baseline`, 0 when both are 0.
fn relative_improvement(baseline: f64, candidate: f64) -> f64 {
    if baseline == candidate {
        return 0.0;
    }
    100.0 * (baseline - candidate) / baseline
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Meta { timing_contended: bool },
    Run(BenchRow),
    Pair(PairSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub pairs: Vec<PairSummary>,
    /// Cells ran concurrently, so wall times may include contention.
    pub timing_contended: bool,
}

impl BenchReport {
    /// Pairs up rows by dataset id; cells where either run failed get no pair.
    pub fn from_rows(rows: Vec<BenchRow>, timing_contended: bool) -> Self {
        let mut pairs = Vec::new();
        let mut ids: Vec<&str> = Vec::new();
        for r in &rows {
            if !ids.contains(&r.dataset_id.as_str()) {
                ids.push(&r.dataset_id);
            }
        }
        for id in ids {
            let find = |alg| {
                rows.iter()
                    .find(|r| r.dataset_id == id && r.algorithm == alg)
            };
            let (Some(a), Some(b)) = (find(Algorithm::FourStep), find(Algorithm::Modified)) else {
                continue;
            };
            if let (Some(ra), Some(rb), Some(ta), Some(tb)) =
                (a.rmse, b.rmse, a.runtime_seconds, b.runtime_seconds)
            {
                pairs.push(PairSummary::new(
                    id,
                    (ra, rb),
                    (ta, tb),
                    a.converged && b.converged,
                ));
            }
        }
        Self {
            rows,
            pairs,
            timing_contended,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True when at least one row ran to convergence.
    pub fn any_converged(&self) -> bool {
        self.rows.iter().any(|r| r.converged)
    }

    /// Copy with every timing field cleared, for determinism checks.
    pub fn without_timings(&self) -> Self {
        let rows: Vec<BenchRow> = self.rows.iter().map(BenchRow::without_timings).collect();
        let pairs = self
            .pairs
            .iter()
            .map(|p| PairSummary {
                runtime_four_step: 0.0,
                runtime_modified: 0.0,
                runtime_overhead_percent: 0.0,
                ..p.clone()
            })
            .collect();
        Self {
            rows,
            pairs,
            timing_contended: self.timing_contended,
        }
    }

    /// Line-delimited JSON: a `meta` record, then `run` records, then `pair` records.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let records = std::iter::once(Record::Meta {
            timing_contended: self.timing_contended,
        })
        .chain(self.rows.iter().cloned().map(Record::Run))
        .chain(self.pairs.iter().cloned().map(Record::Pair));
        for rec in records {
            let line = serde_json::to_string(&rec).expect("report records serialize");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn from_jsonl(text: &str) -> std::result::Result<Self, String> {
        let mut report = Self {
            rows: Vec::new(),
            pairs: Vec::new(),
            timing_contended: false,
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            match rec {
                Record::Meta { timing_contended } => report.timing_contended = timing_contended,
                Record::Run(r) => report.rows.push(r),
                Record::Pair(p) => report.pairs.push(p),
            }
        }
        Ok(report)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableLine {
    pub dataset: String,
    /// `"RMSE"` or `"runtime"`.
    pub parameter: String,
    /// Value with augmented support (modified algorithm).
    pub with_extra_features: f64,
    /// Value without augmentation (plain algorithm).
    pub without_extra_features: f64,
    pub relative_variation_percent: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn table_lines(report: &BenchReport) -> Vec<TableLine> {
    let block = |name: String, rmse: (f64, f64), runtime: (f64, f64)| {
        let p = PairSummary::new(name.clone(), rmse, runtime, true);
        [
            TableLine {
                dataset: name.clone(),
                parameter: "RMSE".into(),
                with_extra_features: p.rmse_modified,
                without_extra_features: p.rmse_four_step,
                relative_variation_percent: p.rmse_improvement_percent,
            },
            TableLine {
                dataset: name,
                parameter: "runtime".into(),
                with_extra_features: p.runtime_modified,
                without_extra_features: p.runtime_four_step,
                relative_variation_percent: p.runtime_overhead_percent,
            },
        ]
    };

    let mut lines = Vec::new();
    let mut groups: Vec<(String, Vec<&PairSummary>)> = Vec::new();
    for p in &report.pairs {
        lines.extend(block(
            p.dataset_id.clone(),
            (p.rmse_four_step, p.rmse_modified),
            (p.runtime_four_step, p.runtime_modified),
        ));
        let base = p
            .dataset_id
            .split('/')
            .next()
            .unwrap_or(&p.dataset_id)
            .to_string();
        match groups.iter_mut().find(|(b, _)| *b == base) {
            Some((_, v)) => v.push(p),
            None => groups.push((base, vec![p])),
        }
    }
    for (base, pairs) in groups.into_iter().filter(|(_, v)| v.len() > 1) {
        let col = |f: fn(&PairSummary) -> f64| {
            median(&mut pairs.iter().map(|p| f(p)).collect::<Vec<_>>())
        };
        let rmse = (col(|p| p.rmse_four_step), col(|p| p.rmse_modified));
        let runtime = (col(|p| p.runtime_four_step), col(|p| p.runtime_modified));
        lines.extend(block(
            format!("{base} (median of {})", pairs.len()),
            rmse,
            runtime,
        ));
    }
    lines
}

/// Writes the aligned text table to `output_path` and one JSON record per
/// table line next to it (see [`structured_path`]).
///
/// Columns mirror a with/without comparison: dataset, parameter, value with
/// extra features, value without, and relative variation in percent. For RMSE
/// the variation is the improvement; for runtime it is the overhead.
pub fn emit_table(report: &BenchReport, output_path: impl AsRef<Path>) -> Result<Vec<TableLine>> {
    let path = output_path.as_ref();
    if report.pairs.is_empty() {
        return Err(Error::InvalidConfig(
            "report has no completed pairs to tabulate".into(),
        ));
    }
    let lines = table_lines(report);

    let header = [
        "Dataset",
        "Parameter",
        "Including extra features",
        "Without extra features",
        "Relative variation (%)",
    ];
    let cells: Vec<[String; 5]> = lines
        .iter()
        .map(|l| {
            [
                l.dataset.clone(),
                l.parameter.clone(),
                format_sig(l.with_extra_features, 6),
                format_sig(l.without_extra_features, 6),
                format!("{:.2}", l.relative_variation_percent),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut text = String::new();
    let fmt_row = |row: &[&str]| {
        row.iter()
            .zip(widths.iter())
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let _ = writeln!(text, "{}", fmt_row(&header));
    let _ = writeln!(
        text,
        "{}",
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  ")
    );
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        let _ = writeln!(text, "{}", fmt_row(&refs));
    }
    if report.timing_contended {
        let _ = writeln!(
            text,
            "\nnote: cells ran concurrently; runtimes may include contention"
        );
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;

    let structured = structured_path(path);
    let mut jsonl = String::new();
    for l in &lines {
        let _ = writeln!(
            jsonl,
            "{}",
            serde_json::to_string(l).expect("table lines serialize")
        );
    }
    fs::write(&structured, jsonl).map_err(|e| Error::io(&structured, e))?;
    Ok(lines)
}

/// Where [`emit_table`] puts the structured copy of a table written to `path`:
/// `t.txt` becomes `t.table.jsonl`.
pub fn structured_path(path: &Path) -> PathBuf {
    path.with_extension("table.jsonl")
}
