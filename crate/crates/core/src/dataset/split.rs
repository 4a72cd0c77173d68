use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Date boundaries for train/validation/test. Both ends are inclusive: rows
/// dated `<= train_end` train, `<= valid_end` validate, the rest test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: NaiveDate,
    pub valid_end: NaiveDate,
}

/// Row ranges produced by [`SplitSpec::partition`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Range<usize>)> {
        [
            ("train", self.train.clone()),
            ("valid", self.valid.clone()),
            ("test", self.test.clone()),
        ]
        .into_iter()
    }
}

impl Default for SplitSpec {
    /// Training through 2019-10-10, validation through 2020-06-23, test after.
    fn default() -> Self {
        Self {
            train_end: NaiveDate::from_ymd_opt(2019, 10, 10).expect("valid date"),
            valid_end: NaiveDate::from_ymd_opt(2020, 6, 23).expect("valid date"),
        }
    }
}

impl SplitSpec {
    pub fn new(train_end: NaiveDate, valid_end: NaiveDate) -> Self {
        Self {
            train_end,
            valid_end,
        }
    }

    /// Maps the boundaries onto sorted `dates`. Every split must be non-empty.
    pub fn partition(&self, dates: &[NaiveDate]) -> Result<SplitRanges> {
        let last = *dates
            .last()
            .ok_or_else(|| Error::Preparation("cannot split an empty dataset".into()))?;
        if !(self.train_end < self.valid_end && self.valid_end < last) {
            return Err(Error::Preparation(format!(
                "split dates must satisfy train_end < valid_end < last date \
                 (got {} / {} / {last})",
                self.train_end, self.valid_end
            )));
        }
        let train_len = dates.partition_point(|d| *d <= self.train_end);
        let valid_len = dates.partition_point(|d| *d <= self.valid_end);
        let ranges = SplitRanges {
            train: 0..train_len,
            valid: train_len..valid_len,
            test: valid_len..dates.len(),
        };
        for (name, r) in ranges.iter() {
            if r.is_empty() {
                return Err(Error::Preparation(format!("{name} split is empty")));
            }
        }
        Ok(ranges)
    }
}
