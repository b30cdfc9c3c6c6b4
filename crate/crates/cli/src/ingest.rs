//! CSV ingestion. Files need a header row; rows are taken in file order as
//! time order. An optional first column named `date` holds observation
//! labels and is not part of the data.

use std::path::Path;

use relchange_core::Sample;

use crate::error::CliError;

/// Numeric columns of a CSV file plus optional observation labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub dates: Option<Vec<String>>,
    pub columns: Vec<Vec<f64>>,
}

/// Reads `path` into a [`Table`]. Every non-label cell must parse as a finite
/// number; failures name the line and column.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {shown}: {e}")))?;
    let header_row = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{shown}: cannot read header row: {e}")))?
        .clone();
    let mut headers: Vec<String> = header_row.iter().map(str::to_string).collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Data(format!("{shown}: missing header row")));
    }
    let has_dates = headers[0].eq_ignore_ascii_case("date");
    if has_dates {
        headers.remove(0);
    }
    if headers.is_empty() {
        return Err(CliError::Data(format!(
            "{shown}: no data columns besides 'date'"
        )));
    }

    let offset = usize::from(has_dates);
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{shown}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() + offset {
            return Err(CliError::Data(format!(
                "{shown}: line {line} has {} fields, expected {}",
                record.len(),
                headers.len() + offset
            )));
        }
        if has_dates {
            dates.push(record[0].to_string());
        }
        for (j, name) in headers.iter().enumerate() {
            let cell = &record[j + offset];
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "{shown}: line {line}, column '{name}': cannot parse {cell:?} as a finite number"
                    ))
                })?;
            columns[j].push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::Data(format!("{shown}: no data rows")));
    }
    Ok(Table {
        headers,
        dates: has_dates.then_some(dates),
        columns,
    })
}

impl Table {
    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    /// All numeric columns as one `n x d` sample.
    pub fn sample(&self) -> Result<Sample, CliError> {
        let cols: Vec<&[f64]> = self.columns.iter().map(Vec::as_slice).collect();
        Ok(Sample::from_columns(&cols)?)
    }

    /// The single numeric column of a univariate file.
    pub fn series(&self) -> Result<&[f64], CliError> {
        match self.columns.as_slice() {
            [only] => Ok(only),
            _ => Err(CliError::Data(format!(
                "expected a single data column, found {} ({})",
                self.d(),
                self.headers.join(", ")
            ))),
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
    }

    /// Regressor and response from the columns named `x` and `y`.
    pub fn regression_pair(&self) -> Result<(&[f64], &[f64]), CliError> {
        match (self.column("x"), self.column("y")) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(CliError::Data(format!(
                "regression input needs columns named x and y, found {}",
                self.headers.join(", ")
            ))),
        }
    }

    /// Label of 1-based observation `index`, if the file has a date column.
    pub fn label(&self, index: usize) -> Option<&str> {
        self.dates
            .as_ref()
            .and_then(|d| index.checked_sub(1).and_then(|i| d.get(i)))
            .map(String::as_str)
    }
}
