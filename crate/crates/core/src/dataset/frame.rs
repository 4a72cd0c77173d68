use std::collections::HashMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::series::TimeSeries;
use crate::error::{Error, Result};

/// Column name of the derived residual component.
pub const RESIDUAL: &str = "residual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Target,
    Exogenous,
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GappedColumn {
    pub name: String,
    pub role: ColumnRole,
    pub values: Vec<Option<f64>>,
}

/// Output of [`left_join`]: target dates with exogenous gaps still present.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedFrame {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<GappedColumn>,
}

impl JoinedFrame {
    pub fn missing_cells(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.values.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    pub fn column(&self, name: &str) -> Option<&GappedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Gap-free, date-indexed table with exactly one target column.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    dates: Vec<NaiveDate>,
    columns: Vec<Column>,
}

impl AlignedDataset {
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<Column>) -> Result<Self> {
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Preparation(
                "dataset dates must be strictly increasing".into(),
            ));
        }
        let targets = columns
            .iter()
            .filter(|c| c.role == ColumnRole::Target)
            .count();
        if targets != 1 {
            return Err(Error::Preparation(format!(
                "dataset needs exactly one target column, found {targets}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Preparation(format!("duplicate column `{}`", c.name)));
            }
            if c.values.len() != dates.len() {
                return Err(Error::Shape(format!(
                    "column `{}` has {} values for {} dates",
                    c.name,
                    c.values.len(),
                    dates.len()
                )));
            }
            if let Some(i) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Preparation(format!(
                    "column `{}` has a non-finite value at {}",
                    c.name, dates[i]
                )));
            }
        }
        Ok(Self { dates, columns })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn role(&self, name: &str) -> Option<ColumnRole> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.role)
    }

    pub fn target_name(&self) -> &str {
        &self
            .columns
            .iter()
            .find(|c| c.role == ColumnRole::Target)
            .expect("validated on construction")
            .name
    }

    pub fn target(&self) -> &[f64] {
        self.column(self.target_name()).expect("target exists")
    }

    /// Adds or replaces a column.
    pub fn with_column(mut self, name: &str, role: ColumnRole, values: Vec<f64>) -> Result<Self> {
        self.columns.retain(|c| c.name != name);
        self.columns.push(Column {
            name: name.to_string(),
            role,
            values,
        });
        Self::new(self.dates, self.columns)
    }

    pub fn without_column(mut self, name: &str) -> Result<Self> {
        if self.role(name) == Some(ColumnRole::Target) {
            return Err(Error::Contract(format!(
                "cannot drop target column `{name}`"
            )));
        }
        self.columns.retain(|c| c.name != name);
        Ok(self)
    }

    pub(crate) fn map_columns(&self, mut f: impl FnMut(&Column) -> Vec<f64>) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                role: c.role,
                values: f(c),
            })
            .collect();
        Self::new(self.dates.clone(), columns)
    }

    /// Writes `date,<col>,...` with shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("date");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for c in &self.columns {
                out.push(',');
                out.push_str(&c.values[i].to_string());
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a table written by [`AlignedDataset::write_csv`]. `target` names
    /// the target column; [`RESIDUAL`] is marked derived and the rest exogenous.
    pub fn read_csv(path: &Path, target: &str) -> Result<Self> {
        let columns: Vec<String> = {
            let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Preparation(format!("{}: {other:?}", path.display())),
            })?;
            reader
                .headers()?
                .iter()
                .skip(1)
                .map(str::to_string)
                .collect()
        };
        let mut series = Vec::with_capacity(columns.len());
        for name in &columns {
            series.push(super::ingest_csv(path, "date", name)?);
        }
        let dates: Vec<NaiveDate> = series
            .first()
            .map(|s| s.dates().collect())
            .unwrap_or_default();
        let cols = series
            .into_iter()
            .map(|s| {
                let role = if s.name() == target {
                    ColumnRole::Target
                } else if s.name() == RESIDUAL {
                    ColumnRole::Derived
                } else {
                    ColumnRole::Exogenous
                };
                let name = s.name().to_string();
                let values = s
                    .points()
                    .iter()
                    .map(|(d, v)| {
                        v.ok_or_else(|| {
                            Error::Preparation(format!("`{name}` is missing a value at {d}"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Column { name, role, values })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dates, cols)
    }
}

/// Aligns every series onto the target's dates. Dates only present in
/// `others` are dropped; dates the other series lacks become gaps.
pub fn left_join(target: &TimeSeries, others: &[TimeSeries]) -> Result<JoinedFrame> {
    if let Some((d, _)) = target.points().iter().find(|(_, v)| v.is_none()) {
        return Err(Error::Contract(format!(
            "target series `{}` has a missing value at {d}",
            target.name()
        )));
    }
    let dates: Vec<NaiveDate> = target.dates().collect();
    let mut columns = vec![GappedColumn {
        name: target.name().to_string(),
        role: ColumnRole::Target,
        values: target.points().iter().map(|(_, v)| *v).collect(),
    }];
    for other in others {
        if columns.iter().any(|c| c.name == other.name()) {
            return Err(Error::Preparation(format!(
                "duplicate series name `{}`",
                other.name()
            )));
        }
        let lookup: HashMap<NaiveDate, Option<f64>> = other.points().iter().copied().collect();
        columns.push(GappedColumn {
            name: other.name().to_string(),
            role: ColumnRole::Exogenous,
            values: dates
                .iter()
                .map(|d| lookup.get(d).copied().flatten())
                .collect(),
        });
    }
    Ok(JoinedFrame { dates, columns })
}

/// Fills gaps: interior runs by linear interpolation between the nearest
/// known neighbours (by row position), edge runs by the nearest known value.
pub fn interpolate(frame: &JoinedFrame) -> Result<AlignedDataset> {
    let columns = frame
        .columns
        .iter()
        .map(|c| {
            Ok(Column {
                name: c.name.clone(),
                role: c.role,
                values: fill_gaps(&c.values).ok_or_else(|| {
                    Error::Preparation(format!("column `{}` has no known values", c.name))
                })?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AlignedDataset::new(frame.dates.clone(), columns)
}

/// Gap filling on a single column; `None` when nothing is known.
pub fn fill_gaps(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect();
    let (&(first_i, first_v), &(last_i, last_v)) = (known.first()?, known.last()?);
    let mut out = vec![0.0; values.len()];
    for v in out.iter_mut().take(first_i) {
        *v = first_v;
    }
    for v in out.iter_mut().skip(last_i + 1) {
        *v = last_v;
    }
    for pair in known.windows(2) {
        let ((i0, v0), (i1, v1)) = (pair[0], pair[1]);
        out[i0] = v0;
        let span = (i1 - i0) as f64;
        for (k, slot) in out.iter_mut().enumerate().take(i1).skip(i0 + 1) {
            let t = (k - i0) as f64 / span;
            *slot = v0 + (v1 - v0) * t;
        }
    }
    out[last_i] = last_v;
    Some(out)
}
