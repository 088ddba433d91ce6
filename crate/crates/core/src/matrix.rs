//! Masked dense matrices, the observation projection, column normalization
//! and the empirical covariance of normalized columns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Columns with Euclidean norm at or below this are treated as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// An `m x n` real matrix together with its observation mask.
///
/// Unobserved entries of `values` are stored as `0.0`; the mask is the only
/// source of truth about which entries are data.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl MaskedMatrix {
    /// Pairs `values` with `mask`, zeroing every unobserved entry.
    pub fn new(mut values: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::dims(
                "MaskedMatrix::new",
                format!("{:?}", values.shape()),
                format!("{:?}", mask.shape()),
            ));
        }
        values.zip_apply(&mask, |v, observed| {
            if !observed {
                *v = 0.0;
            }
        });
        Ok(Self { values, mask })
    }

    pub fn fully_observed(values: DMatrix<f64>) -> Self {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self { values, mask }
    }

    /// Builds a masked matrix where `NaN` entries are unobserved.
    pub fn from_nan(values: DMatrix<f64>) -> Self {
        let mask = values.map(|v| !v.is_nan());
        let values = values.map(|v| if v.is_nan() { 0.0 } else { v });
        Self { values, mask }
    }

    /// Zero-filled values.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[(row, col)]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn observed_fraction(&self) -> f64 {
        let total = self.nrows() * self.ncols();
        if total == 0 {
            return 0.0;
        }
        self.observed_count() as f64 / total as f64
    }

    pub fn row_is_complete(&self, row: usize) -> bool {
        self.mask.row(row).iter().all(|&b| b)
    }

    /// Values with unobserved entries replaced by `NaN`.
    pub fn to_nan_filled(&self) -> DMatrix<f64> {
        let mut out = self.values.clone();
        out.zip_apply(&self.mask, |v, observed| {
            if !observed {
                *v = f64::NAN;
            }
        });
        out
    }

    /// Slices the given columns, in the order given.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let n = self.ncols();
        if let Some(&bad) = cols.iter().find(|&&c| c >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        Ok(Self {
            values: self.values.select_columns(cols),
            mask: self.mask.select_columns(cols),
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let m = self.nrows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(Error::IndexOutOfRange { index: bad, len: m });
        }
        Ok(Self {
            values: self.values.select_rows(rows),
            mask: self.mask.select_rows(rows),
        })
    }
}

/// `P_E`: keeps entries where `mask` is true and zeroes the rest.
pub fn project_observed(x: &DMatrix<f64>, mask: &DMatrix<bool>) -> Result<DMatrix<f64>> {
    if x.shape() != mask.shape() {
        return Err(Error::dims(
            "project_observed",
            format!("{:?}", x.shape()),
            format!("{:?}", mask.shape()),
        ));
    }
    Ok(x.zip_map(mask, |v, observed| if observed { v } else { 0.0 }))
}

/// Result of [`normalize_columns`]: the scaled matrix plus one flag per column
/// that was too small to normalize (those columns are returned as zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedColumns {
    pub matrix: DMatrix<f64>,
    pub degenerate: Vec<bool>,
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns(x: &DMatrix<f64>) -> NormalizedColumns {
    normalize_columns_with(x, false)
}

/// Like [`normalize_columns`], optionally subtracting each column's mean first
/// (which turns the resulting covariance into a correlation matrix).
pub fn normalize_columns_with(x: &DMatrix<f64>, center: bool) -> NormalizedColumns {
    let mut matrix = x.clone();
    let mut degenerate = Vec::with_capacity(x.ncols());
    for mut col in matrix.column_iter_mut() {
        if center && !col.is_empty() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let norm = col.norm();
        if norm > DEGENERATE_NORM {
            col.unscale_mut(norm);
            degenerate.push(false);
        } else {
            col.fill(0.0);
            degenerate.push(true);
        }
    }
    NormalizedColumns { matrix, degenerate }
}

/// Symmetric `n x n` feature inner-product matrix `XᵀX`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps an explicit square matrix, symmetrizing it as `(A + Aᵀ) / 2`.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::dims(
                "CovarianceMatrix::from_entries",
                "square matrix",
                format!("{:?}", entries.shape()),
            ));
        }
        Ok(Self {
            entries: symmetrize(entries),
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Plain-text form: one row per line, comma separated, 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let line: Vec<String> = row.iter().map(|&v| format_sig(v, 9)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn parse_text(text: &str) -> std::result::Result<Self, String> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("line {}: {tok:?}: {e}", lineno + 1))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(format!(
                "line {}: expected {n} values, found {}",
                i + 1,
                r.len()
            ));
        }
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Self { entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// `C = XᵀX`, symmetrized. The caller normalizes columns first.
pub fn empirical_covariance(x: &DMatrix<f64>) -> CovarianceMatrix {
    CovarianceMatrix {
        entries: symmetrize(x.tr_mul(x)),
    }
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = a;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out
}

/// Formats `v` rounded to `digits` significant digits, in the shortest form
/// that parses back to the rounded value.
pub(crate) fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .unwrap_or(v);
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mask = DMatrix::from_row_slice(2, 2, &[true, false, true, true]);
        // elementwise multiply by the 0/1 indicator
        let oracle = x.component_mul(&mask.map(|b| if b { 1.0 } else { 0.0 }));
        let got = project_observed(&x, &mask).unwrap();
        assert_eq!(got, oracle);
        assert_eq!(got, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 3.0, 4.0]));

        let all = DMatrix::from_element(2, 2, true);
        assert_eq!(project_observed(&x, &all).unwrap(), x);
        let none = DMatrix::from_element(2, 2, false);
        assert_eq!(project_observed(&x, &none).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn projection_rejects_mismatch() {
        let x = DMatrix::<f64>::zeros(2, 3);
        let mask = DMatrix::from_element(3, 2, true);
        assert!(matches!(
            project_observed(&x, &mask),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(MaskedMatrix::new(x, mask).is_err());
    }

    #[test]
    fn masked_storage_zeroes_unobserved() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mask = DMatrix::from_row_slice(2, 2, &[true, false, false, true]);
        let m = MaskedMatrix::new(x, mask).unwrap();
        assert_eq!(m.values()[(0, 1)], 0.0);
        assert_eq!(m.values()[(1, 0)], 0.0);
        assert_eq!(m.observed_count(), 2);
        assert!(!m.row_is_complete(0));
        assert!(m.to_nan_filled()[(0, 1)].is_nan());
    }

    #[test]
    fn normalization_examples() {
        let x = DMatrix::from_column_slice(2, 3, &[3.0, 4.0, 0.6, 0.8, 0.0, 0.0]);
        let out = normalize_columns(&x);
        assert!((out.matrix[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((out.matrix[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((out.matrix[(0, 1)] - 0.6).abs() < 1e-12);
        assert!((out.matrix[(1, 1)] - 0.8).abs() < 1e-12);
        assert_eq!(out.degenerate, vec![false, false, true]);
        assert_eq!(out.matrix.column(2).norm(), 0.0);
    }

    #[test]
    fn centered_normalization_gives_correlation() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let out = normalize_columns_with(&x, true);
        let c = empirical_covariance(&out.matrix);
        assert!((c.get(0, 1) - 1.0).abs() < 1e-12);
        // a constant column becomes degenerate once centered
        let k = DMatrix::from_element(3, 1, 5.0);
        assert_eq!(normalize_columns_with(&k, true).degenerate, vec![true]);
    }

    #[test]
    fn covariance_examples() {
        let eye = DMatrix::<f64>::identity(4, 3);
        let c = empirical_covariance(&eye);
        assert_eq!(c.entries(), &DMatrix::<f64>::identity(3, 3));

        let col = DMatrix::from_column_slice(2, 2, &[0.6, 0.8, 0.6, 0.8]);
        let c = empirical_covariance(&col);
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);

        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let nx = normalize_columns(&x).matrix;
        // direct double-loop dot products
        let mut oracle = 0.0;
        for r in 0..3 {
            oracle += nx[(r, 0)] * nx[(r, 1)];
        }
        let c = empirical_covariance(&nx);
        assert!((c.get(0, 1) - oracle).abs() < 1e-15);
        assert!((c.get(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(c.get(0, 1), c.get(1, 0));
    }

    #[test]
    fn covariance_text_round_trip() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 2.0, 0.5, 0.0, 0.0, 1.0]);
        let c = empirical_covariance(&normalize_columns(&x).matrix);
        let text = c.to_text();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(',').count() == 3));
        let back = CovarianceMatrix::parse_text(&text).unwrap();
        for (a, b) in back.entries().iter().zip(c.entries().iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }
        assert!(CovarianceMatrix::parse_text("1,2\n3").is_err());
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.123456789012345, 9), "0.123456789");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(-2.5e-7, 3), "-0.00000025");
    }
}
