use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// A time-ordered set of `n` observations in `d` dimensions.
///
/// Row `i` holds the observation at time `i + 1`. Construction checks that
/// there are at least two rows, at least one column and no non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(invalid("sample dimension must be at least 1"));
        }
        if data.nrows() < 2 {
            return Err(invalid(format!(
                "sample needs at least 2 observations, got {}",
                data.nrows()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(invalid(format!(
                "non-finite entry at row {}, column {}",
                row + 1,
                col + 1
            )));
        }
        Ok(Self { data })
    }

    /// Univariate sample from a slice.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    /// Multivariate sample from row vectors; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid("rows have differing lengths"));
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    /// Sample whose columns are the given equally long series.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(invalid("columns have differing lengths"));
        }
        Self::new(DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Rows `start..end` as a new matrix.
    pub(crate) fn rows_range(&self, start: usize, end: usize) -> DMatrix<f64> {
        self.data.rows(start, end - start).into_owned()
    }

    /// Applies `f` entrywise, re-validating finiteness.
    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.data.map(f))
    }
}
