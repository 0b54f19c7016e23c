//! Loading labeled multivariate series from CSV and turning price levels into returns.
//!
//! Input is "wide": a header row of variable labels after a leading date column,
//! then one row per ISO-8601 date. An empty cell is a missing observation.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Observed levels as read from disk, possibly with gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub labels: Vec<String>,
    pub timestamps: Vec<NaiveDate>,
    /// T×N levels; missing cells hold NaN.
    pub values: Matrix<f64>,
    /// T×N, true where the cell was empty.
    pub missing: Matrix<bool>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.as_slice().iter().filter(|&&m| m).count()
    }
}

/// Complete analysis matrix: rows are time, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix<T> {
    pub labels: Vec<String>,
    pub timestamps: Vec<NaiveDate>,
    pub data: Matrix<T>,
}

impl<T: Real> SeriesMatrix<T> {
    /// Builds a series with synthetic labels `V1..VN` and consecutive daily dates.
    pub fn from_matrix(data: Matrix<T>) -> Self {
        let labels = (1..=data.cols()).map(|i| format!("V{i}")).collect();
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let timestamps = start.iter_days().take(data.rows()).collect();
        Self {
            labels,
            timestamps,
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.data.cols()
    }

    /// Fails on the first column whose full-span sample variance is zero.
    pub fn check_variance(&self) -> Result<()> {
        let t = self.len();
        for j in 0..self.n_vars() {
            let first = self.data[(0, j)];
            if t < 2 || (1..t).all(|i| self.data[(i, j)] == first) {
                return Err(Error::Data(format!(
                    "variable {} has zero variance over the full span",
                    self.labels[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    #[default]
    Log,
    Simple,
    None,
}

impl fmt::Display for ReturnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Log => "log",
            Self::Simple => "simple",
            Self::None => "none",
        })
    }
}

impl FromStr for ReturnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Self::Log),
            "simple" => Ok(Self::Simple),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown return kind {other:?} (expected log, simple or none)"
            ))),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, path)
}

/// Parses wide CSV from any reader; `source` only labels error messages.
pub fn parse_csv(reader: impl Read, source: impl AsRef<Path>) -> Result<RawSeries> {
    let source = source.as_ref();
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        row,
        column,
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| parse_err(1, 1, e.to_string()))?,
        None => return Err(parse_err(1, 1, "empty file: header row is mandatory".into())),
    };
    if header.len() < 2 {
        return Err(parse_err(1, 1, "header needs a date column and at least one variable".into()));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut seen = HashSet::new();
    for (j, label) in labels.iter().enumerate() {
        if label.is_empty() {
            return Err(parse_err(1, j + 2, "empty variable label".into()));
        }
        if !seen.insert(label.as_str()) {
            return Err(parse_err(1, j + 2, format!("duplicate label {label:?}")));
        }
    }

    let n = labels.len();
    let width = n + 1;
    let mut timestamps: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    let mut missing = Vec::new();

    for (idx, rec) in records.enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| parse_err(row, 1, e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(
                row,
                rec.len().min(width) + 1,
                format!("ragged row: expected {width} fields, found {}", rec.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| parse_err(row, 1, format!("malformed date {:?}: {e}", &rec[0])))?;
        if let Some(&prev) = timestamps.last() {
            if date == prev {
                return Err(parse_err(row, 1, format!("duplicate timestamp {date}")));
            }
            if date < prev {
                return Err(parse_err(
                    row,
                    1,
                    format!("non-monotonic timestamp {date} follows {prev}"),
                ));
            }
        }
        timestamps.push(date);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() {
                values.push(f64::NAN);
                missing.push(true);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(row, j + 2, format!("malformed number {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, j + 2, format!("non-finite value {cell:?}")));
            }
            values.push(v);
            missing.push(false);
        }
    }

    let t = timestamps.len();
    Ok(RawSeries {
        labels,
        timestamps,
        values: Matrix::from_vec(t, n, values),
        missing: Matrix::from_vec(t, n, missing),
    })
}

/// Keeps only the columns with no missing cell over the full span.
///
/// Returns the reduced series together with the labels that were dropped.
pub fn filter_complete(raw: &RawSeries) -> Result<(RawSeries, Vec<String>)> {
    let n = raw.n_vars();
    let (keep, drop): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&j| (0..raw.len()).all(|i| !raw.missing[(i, j)]));
    if keep.is_empty() {
        return Err(Error::NoCompleteSeries(n));
    }
    let dropped = drop.iter().map(|&j| raw.labels[j].clone()).collect();
    let series = RawSeries {
        labels: keep.iter().map(|&j| raw.labels[j].clone()).collect(),
        timestamps: raw.timestamps.clone(),
        values: raw.values.select_columns(&keep),
        missing: raw.missing.select_columns(&keep),
    };
    Ok((series, dropped))
}

/// Converts levels to analysis values.
///
/// Log and simple returns drop the first row and carry the end date of each step;
/// `ReturnKind::None` passes levels through unchanged.
pub fn to_returns<T: Real>(raw: &RawSeries, kind: ReturnKind) -> Result<SeriesMatrix<T>> {
    if raw.missing_count() > 0 {
        return Err(Error::Data(
            "series has missing entries; apply filter_complete first".into(),
        ));
    }
    let (t, n) = raw.values.shape();
    let level_error = |i: usize, j: usize| Error::NonPositiveLevel {
        label: raw.labels[j].clone(),
        date: raw.timestamps[i].to_string(),
        value: raw.values[(i, j)],
    };

    let (data, timestamps) = match kind {
        ReturnKind::None => (raw.values.map(T::of), raw.timestamps.clone()),
        ReturnKind::Log | ReturnKind::Simple => {
            for i in 0..t {
                for j in 0..n {
                    let v = raw.values[(i, j)];
                    let bad = match kind {
                        ReturnKind::Log => v <= 0.0,
                        _ => v == 0.0 && i + 1 < t,
                    };
                    if bad {
                        return Err(level_error(i, j));
                    }
                }
            }
            let rows = t.saturating_sub(1);
            let data = Matrix::from_fn(rows, n, |i, j| {
                let (a, b) = (raw.values[(i, j)], raw.values[(i + 1, j)]);
                T::of(match kind {
                    ReturnKind::Log => (b / a).ln(),
                    _ => (b - a) / a,
                })
            });
            (data, raw.timestamps.iter().skip(1).copied().collect())
        }
    };
    Ok(SeriesMatrix {
        labels: raw.labels.clone(),
        timestamps,
        data,
    })
}
