use serde::{Deserialize, Serialize};

use super::frame::AlignedDataset;
use super::split::SplitSpec;
use crate::error::{Error, Result};

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub std: f64,
}

impl ColumnScale {
    pub fn fit(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        (std > 0.0 && std.is_finite()).then_some(Self { mean, std })
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedScale {
    pub column: String,
    #[serde(flatten)]
    pub scale: ColumnScale,
}

/// Per-column standardisation fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<NamedScale>,
}

/// Fits a [`Scaler`] on the training slice of every column in `dataset`.
pub fn fit_scaler(dataset: &AlignedDataset, split: &SplitSpec) -> Result<Scaler> {
    let ranges = split.partition(dataset.dates())?;
    let columns = dataset
        .columns()
        .iter()
        .map(|c| {
            let scale = ColumnScale::fit(&c.values[ranges.train.clone()]).ok_or_else(|| {
                Error::Preparation(format!(
                    "column `{}` is constant on the training split",
                    c.name
                ))
            })?;
            Ok(NamedScale {
                column: c.name.clone(),
                scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scaler { columns })
}

impl Scaler {
    pub fn get(&self, column: &str) -> Result<ColumnScale> {
        self.columns
            .iter()
            .find(|c| c.column == column)
            .map(|c| c.scale)
            .ok_or_else(|| Error::MissingColumn(column.to_string()))
    }

    /// Standardises every column the scaler knows; other columns pass through.
    pub fn transform(&self, dataset: &AlignedDataset) -> Result<AlignedDataset> {
        dataset.map_columns(|c| match self.get(&c.name) {
            Ok(s) => c.values.iter().map(|&v| s.transform(v)).collect(),
            Err(_) => c.values.clone(),
        })
    }

    pub fn inverse_transform(&self, dataset: &AlignedDataset) -> Result<AlignedDataset> {
        dataset.map_columns(|c| match self.get(&c.name) {
            Ok(s) => c.values.iter().map(|&v| s.inverse(v)).collect(),
            Err(_) => c.values.clone(),
        })
    }

    pub fn inverse_column(&self, column: &str, values: &[f64]) -> Result<Vec<f64>> {
        let s = self.get(column)?;
        Ok(values.iter().map(|&v| s.inverse(v)).collect())
    }
}
