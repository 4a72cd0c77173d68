use std::ops::Range;

use chrono::NaiveDate;

use super::frame::AlignedDataset;
use super::split::SplitSpec;
use crate::error::{Error, Result};
use crate::numeric::Array2;

/// Which columns feed a model and how far it looks back and ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub features: Vec<String>,
    pub target: String,
    pub window: usize,
    pub horizon: usize,
}

/// `window x features` inputs and the next `horizon` target values.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub inputs: Array2,
    pub targets: Vec<f64>,
    /// Date of the last input row.
    pub anchor_date: NaiveDate,
    /// Dataset row index of the last input row.
    pub anchor_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSplits {
    pub train: Vec<WindowedSample>,
    pub valid: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
}

/// Windows one contiguous row range; no sample reaches outside `rows`.
pub fn windows_in_range(
    dataset: &AlignedDataset,
    spec: &WindowSpec,
    rows: Range<usize>,
) -> Result<Vec<WindowedSample>> {
    if spec.window == 0 || spec.horizon == 0 {
        return Err(Error::Parameter(
            "window and horizon must be at least 1".into(),
        ));
    }
    if spec.features.is_empty() {
        return Err(Error::Parameter(
            "at least one input feature is required".into(),
        ));
    }
    let needed = spec.window + spec.horizon;
    if rows.len() < needed {
        return Err(Error::Preparation(format!(
            "split of {} rows is too short: window {} + horizon {} needs at least {needed}",
            rows.len(),
            spec.window,
            spec.horizon
        )));
    }
    let features = spec
        .features
        .iter()
        .map(|f| dataset.column(f))
        .collect::<Result<Vec<_>>>()?;
    let target = dataset.column(&spec.target)?;
    let count = rows.len() - needed + 1;
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let first = rows.start + s;
        let anchor = first + spec.window - 1;
        let mut data = Vec::with_capacity(spec.window * features.len());
        for row in first..=anchor {
            data.extend(features.iter().map(|col| col[row]));
        }
        out.push(WindowedSample {
            inputs: Array2::new(spec.window, features.len(), data)?,
            targets: target[anchor + 1..=anchor + spec.horizon].to_vec(),
            anchor_date: dataset.dates()[anchor],
            anchor_index: anchor,
        });
    }
    Ok(out)
}

/// Windows each split independently.
pub fn make_windows(
    dataset: &AlignedDataset,
    spec: &WindowSpec,
    split: &SplitSpec,
) -> Result<WindowedSplits> {
    let ranges = split.partition(dataset.dates())?;
    let labelled = |name: &str, r: Range<usize>| {
        windows_in_range(dataset, spec, r).map_err(|e| match e {
            Error::Preparation(m) => Error::Preparation(format!("{name}: {m}")),
            other => other,
        })
    };
    Ok(WindowedSplits {
        train: labelled("train", ranges.train)?,
        valid: labelled("valid", ranges.valid)?,
        test: labelled("test", ranges.test)?,
    })
}
