use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// A dated univariate series; `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    points: Vec<(NaiveDate, Option<f64>)>,
}

impl TimeSeries {
    /// Dates must be strictly increasing and at least two values known.
    pub fn new(name: impl Into<String>, points: Vec<(NaiveDate, Option<f64>)>) -> Result<Self> {
        let name = name.into();
        if let Some(w) = points.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::Preparation(format!(
                "series `{name}`: dates not strictly increasing at {}",
                w[1].0
            )));
        }
        let known = points.iter().filter(|(_, v)| v.is_some()).count();
        if known < 2 {
            return Err(Error::Preparation(format!(
                "series `{name}` has {known} known values, at least 2 are required"
            )));
        }
        if let Some((d, _)) = points
            .iter()
            .find(|(_, v)| v.is_some_and(|x| !x.is_finite()))
        {
            return Err(Error::Preparation(format!(
                "series `{name}`: non-finite value at {d}"
            )));
        }
        Ok(Self { name, points })
    }

    /// Builds a fully observed series from parallel date/value slices.
    pub fn from_values(
        name: impl Into<String>,
        dates: &[NaiveDate],
        values: &[f64],
    ) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        Self::new(
            name,
            dates
                .iter()
                .copied()
                .zip(values.iter().map(|&v| Some(v)))
                .collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[(NaiveDate, Option<f64>)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.points.iter().filter(|(_, v)| v.is_none()).count()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|(d, _)| *d)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Reads one series from a headed CSV with an ISO-8601 date column.
///
/// Rows may come in any order; they are sorted by date. Repeated dates are
/// merged when their values agree and rejected otherwise. Row numbers in
/// errors are file line numbers (the header is line 1).
pub fn ingest_csv(path: &Path, date_column: &str, value_column: &str) -> Result<TimeSeries> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Ingest {
                path: display.clone(),
                row: 1,
                message: format!("{other:?}"),
            },
        })?;
    let ingest_err = |row: usize, message: String| Error::Ingest {
        path: display.clone(),
        row,
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| ingest_err(1, e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest_err(1, format!("column `{name}` not found in header")))
    };
    let date_idx = find(date_column)?;
    let value_idx = find(value_column)?;

    let mut by_date: BTreeMap<NaiveDate, Option<f64>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| ingest_err(row, e.to_string()))?;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| ingest_err(row, format!("unparseable date `{raw_date}`")))?;
        let raw_value = record.get(value_idx).unwrap_or("");
        let value = if raw_value.is_empty() {
            None
        } else {
            let v: f64 = raw_value
                .parse()
                .map_err(|_| ingest_err(row, format!("unparseable value `{raw_value}`")))?;
            if !v.is_finite() {
                return Err(ingest_err(row, format!("non-finite value `{raw_value}`")));
            }
            Some(v)
        };
        match by_date.get(&date) {
            None => {
                by_date.insert(date, value);
            }
            Some(existing) => match (*existing, value) {
                (Some(a), Some(b)) if a != b => {
                    return Err(ingest_err(
                        row,
                        format!("duplicate date {date} with conflicting values {a} and {b}"),
                    ));
                }
                (None, Some(b)) => {
                    by_date.insert(date, Some(b));
                }
                _ => {}
            },
        }
    }
    TimeSeries::new(value_column, by_date.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_well_formed_file() {
        let f = write("Date,Price\n2020-01-02,10.5\n2020-01-03,11\n2020-01-06,12.25\n");
        let s = ingest_csv(f.path(), "Date", "Price").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.points()[2].1, Some(12.25));
    }

    #[test]
    fn empty_cell_is_missing() {
        let f = write("date,v\n2020-01-01,1\n2020-01-02,\n2020-01-03,3\n");
        let s = ingest_csv(f.path(), "date", "v").unwrap();
        assert_eq!(s.points()[1].1, None);
        assert_eq!(s.missing_count(), 1);
    }

    #[test]
    fn sorts_and_merges_agreeing_duplicates() {
        let f = write("date,v\n2020-01-03,3\n2020-01-01,1\n2020-01-03,3\n");
        let s = ingest_csv(f.path(), "date", "v").unwrap();
        let dates: Vec<_> = s.dates().map(|d| d.to_string()).collect();
        assert_eq!(dates, ["2020-01-01", "2020-01-03"]);
    }

    #[test]
    fn conflicting_duplicate_names_the_date() {
        let f = write("date,v\n2020-01-01,1\n2020-01-02,2\n2020-01-02,5\n");
        let err = ingest_csv(f.path(), "date", "v").unwrap_err().to_string();
        assert!(err.contains("2020-01-02"), "{err}");
        assert!(err.contains("row 4"), "{err}");
    }

    #[test]
    fn bad_date_reports_row() {
        let f = write("date,v\n2020-01-01,1\n01/02/2020,2\n");
        let err = ingest_csv(f.path(), "date", "v").unwrap_err();
        assert!(matches!(err, Error::Ingest { row: 3, .. }), "{err}");
    }

    #[test]
    fn bad_value_reports_row() {
        let f = write("date,v\n2020-01-01,1\n2020-01-02,abc\n");
        assert!(matches!(
            ingest_csv(f.path(), "date", "v"),
            Err(Error::Ingest { row: 3, .. })
        ));
    }

    #[test]
    fn missing_column_is_an_error() {
        let f = write("date,v\n2020-01-01,1\n");
        assert!(ingest_csv(f.path(), "date", "price").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ingest_csv(Path::new("/nonexistent/brent.csv"), "d", "v").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
