//! Moving-average trend / residual split of the target series.
//!
//! The centered mode averages `t-k..=t+k` and therefore looks `k` rows into
//! the future; [`DecomposeMode::Trailing`] averages only `t-w+1..=t`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecomposeMode {
    #[default]
    Centered,
    Trailing,
}

impl std::str::FromStr for DecomposeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(Self::Centered),
            "trailing" => Ok(Self::Trailing),
            other => Err(Error::Parameter(format!(
                "unknown decomposition mode `{other}` (expected centered or trailing)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub residual: Vec<f64>,
    pub window: usize,
    pub mode: DecomposeMode,
}

/// Centered moving-average decomposition with windows shrinking at the edges.
pub fn decompose(series: &[f64], ma_window: usize) -> Result<Decomposition> {
    decompose_with(series, ma_window, DecomposeMode::Centered)
}

pub fn decompose_with(
    series: &[f64],
    ma_window: usize,
    mode: DecomposeMode,
) -> Result<Decomposition> {
    if ma_window.is_multiple_of(2) || ma_window < 3 || ma_window > series.len() {
        return Err(Error::Parameter(format!(
            "moving-average window must be odd and within 3..={}, got {ma_window}",
            series.len()
        )));
    }
    let n = series.len();
    let k = (ma_window - 1) / 2;
    let trend: Vec<f64> = (0..n)
        .map(|t| {
            let (lo, hi) = match mode {
                DecomposeMode::Centered => (t.saturating_sub(k), (t + k).min(n - 1)),
                DecomposeMode::Trailing => ((t + 1).saturating_sub(ma_window), t),
            };
            let span = &series[lo..=hi];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect();
    let residual = series.iter().zip(&trend).map(|(v, m)| v - m).collect();
    Ok(Decomposition {
        trend,
        residual,
        window: ma_window,
        mode,
    })
}

impl Decomposition {
    /// Writes `date,value,trend,residual`.
    pub fn write_csv(&self, path: &Path, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
        if dates.len() != self.trend.len() || values.len() != self.trend.len() {
            return Err(Error::Shape(format!(
                "{} dates / {} values for a decomposition of length {}",
                dates.len(),
                values.len(),
                self.trend.len()
            )));
        }
        let mut out = String::from("date,value,trend,residual\n");
        for i in 0..dates.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                dates[i].format("%Y-%m-%d"),
                values[i],
                self.trend[i],
                self.residual[i]
            );
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_residual() {
        let d = decompose(&[4.2; 9], 5).unwrap();
        assert!(d.trend.iter().all(|&t| (t - 4.2).abs() < 1e-15));
        assert!(d.residual.iter().all(|&r| r.abs() < 1e-15));
    }

    #[test]
    fn linear_series_interior_and_edge() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        let d = decompose(&s, 3).unwrap();
        assert_eq!(d.trend[4], 5.0);
        assert_eq!(d.residual[4], 0.0);
        assert_eq!(d.trend[0], 1.5);
        assert_eq!(d.residual[0], -0.5);
        assert_eq!(d.trend[9], 9.5);
    }

    #[test]
    fn trailing_mode_uses_only_the_past() {
        let s: Vec<f64> = (1..=6).map(f64::from).collect();
        let d = decompose_with(&s, 3, DecomposeMode::Trailing).unwrap();
        assert_eq!(d.trend, [1.0, 1.5, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn rejects_bad_windows() {
        let s = [1.0, 2.0, 3.0, 4.0];
        for w in [0, 1, 2, 4, 5] {
            assert!(
                matches!(decompose(&s, w), Err(Error::Parameter(_))),
                "window {w}"
            );
        }
        assert!(decompose(&s, 3).is_ok());
    }

    #[test]
    fn parses_modes() {
        assert_eq!(
            "trailing".parse::<DecomposeMode>().unwrap(),
            DecomposeMode::Trailing
        );
        assert!("stl".parse::<DecomposeMode>().is_err());
    }
}
