//! Error metrics in price units and benchmark tables.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::SplitSpec;
use crate::error::{Error, Result};
use crate::numeric::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
    pub horizon: usize,
}

/// MAE, MSE and RMSE over flat, paired values.
pub fn metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Contract("metrics of an empty set".into()));
    }
    let n = actual.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (y, p) in actual.iter().zip(predicted) {
        let e = y - p;
        abs += e.abs();
        sq += e * e;
    }
    let mse = sq / n;
    Ok(Metrics {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
        n: actual.len(),
        horizon: 1,
    })
}

/// Metrics over `samples x horizon` matrices, pooling all horizon steps.
pub fn metrics_matrix(actual: &Array2, predicted: &Array2) -> Result<Metrics> {
    if actual.shape() != predicted.shape() {
        return Err(Error::Shape(format!(
            "actual {}x{} vs predicted {}x{}",
            actual.rows(),
            actual.cols(),
            predicted.rows(),
            predicted.cols()
        )));
    }
    let mut m = metrics(actual.data(), predicted.data())?;
    m.n = actual.rows();
    m.horizon = actual.cols();
    Ok(m)
}

/// One [`Metrics`] per horizon step.
pub fn per_step_metrics(actual: &Array2, predicted: &Array2) -> Result<Vec<Metrics>> {
    if actual.shape() != predicted.shape() {
        return Err(Error::Shape("actual and predicted shapes differ".into()));
    }
    (0..actual.cols())
        .map(|k| {
            let a: Vec<f64> = (0..actual.rows()).map(|r| actual.get(r, k)).collect();
            let p: Vec<f64> = (0..actual.rows()).map(|r| predicted.get(r, k)).collect();
            metrics(&a, &p)
        })
        .collect()
}

/// Inputs that identify a run, plus their content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigDigest {
    pub window: usize,
    pub features: Vec<String>,
    pub seed: u64,
    pub digest: String,
}

impl ConfigDigest {
    pub fn new(window: usize, features: &[String], seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update((window as u64).to_le_bytes());
        for f in features {
            h.update((f.len() as u64).to_le_bytes());
            h.update(f.as_bytes());
        }
        h.update(seed.to_le_bytes());
        let digest = h
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect();
        Self {
            window,
            features: features.to_vec(),
            seed,
            digest,
        }
    }
}

/// A finished, evaluated run in price units.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub name: String,
    pub config: ConfigDigest,
    pub split: SplitSpec,
    pub anchor_dates: Vec<NaiveDate>,
    pub actual: Array2,
    pub predicted: Array2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub horizon: usize,
    pub metrics: Metrics,
    pub config: ConfigDigest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub rows: Vec<BenchmarkRow>,
}

/// Scores every run and sorts by ascending MAE. All runs must share split
/// dates and test anchor dates.
pub fn benchmark(runs: &[BenchmarkRun]) -> Result<Benchmark> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Contract("benchmark needs at least one run".into()))?;
    for r in &runs[1..] {
        if r.split != first.split {
            return Err(Error::Comparison(format!(
                "`{}` and `{}` use different split dates",
                first.name, r.name
            )));
        }
        if r.anchor_dates != first.anchor_dates {
            return Err(Error::Comparison(format!(
                "`{}` and `{}` are scored on different test windows",
                first.name, r.name
            )));
        }
    }
    let mut rows = runs
        .iter()
        .map(|r| {
            let metrics = metrics_matrix(&r.actual, &r.predicted)?;
            Ok(BenchmarkRow {
                model: r.name.clone(),
                horizon: metrics.horizon,
                metrics,
                config: r.config.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.metrics.mae.total_cmp(&b.metrics.mae));
    Ok(Benchmark { rows })
}

impl Benchmark {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,horizon,mae,mse,rmse,n,window,features,seed,digest\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.model,
                r.horizon,
                r.metrics.mae,
                r.metrics.mse,
                r.metrics.rmse,
                r.metrics.n,
                r.config.window,
                r.config.features.join("+"),
                r.config.seed,
                r.config.digest
            );
        }
        out
    }

    /// Fixed-width text table: Model, Horizon, MAE, MSE, RMSE.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.model.len())
            .chain(std::iter::once("Model".len()))
            .max()
            .unwrap_or(5);
        let mut out = format!(
            "{:<width$}  {:>7}  {:>10}  {:>10}  {:>10}\n",
            "Model", "Horizon", "MAE", "MSE", "RMSE"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>10.5}  {:>10.5}  {:>10.5}",
                r.model, r.horizon, r.metrics.mae, r.metrics.mse, r.metrics.rmse
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_unit_examples() {
        let m = metrics(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse), (0.0, 0.0, 0.0));
        let m = metrics(&[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.rmse), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_example() {
        let m = metrics(&[2.0, 4.0], &[1.0, 6.0]).unwrap();
        assert_eq!(m.mae, 1.5);
        assert_eq!(m.mse, 2.5);
        assert_eq!(m.rmse, 2.5f64.sqrt());
        assert!((m.rmse - 1.58114).abs() < 1e-5);
    }

    #[test]
    fn contract_errors() {
        assert!(matches!(metrics(&[], &[]), Err(Error::Contract(_))));
        assert!(matches!(metrics(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn pooled_and_per_step() {
        let a = Array2::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let p = Array2::from_rows(&[[1.0, 3.0], [3.0, 2.0]]).unwrap();
        let m = metrics_matrix(&a, &p).unwrap();
        assert_eq!((m.n, m.horizon, m.mae), (2, 2, 0.75));
        let steps = per_step_metrics(&a, &p).unwrap();
        assert_eq!(steps[0].mae, 0.0);
        assert_eq!(steps[1].mae, 1.5);
    }

    fn run(name: &str, actual: &[f64], pred: &[f64]) -> BenchmarkRun {
        let d = NaiveDate::from_ymd_opt(2020, 7, 1).unwrap();
        BenchmarkRun {
            name: name.into(),
            config: ConfigDigest::new(5, &["brent".into()], 1),
            split: SplitSpec::default(),
            anchor_dates: (0..actual.len())
                .map(|i| d + chrono::Days::new(i as u64))
                .collect(),
            actual: Array2::new(actual.len(), 1, actual.to_vec()).unwrap(),
            predicted: Array2::new(pred.len(), 1, pred.to_vec()).unwrap(),
        }
    }

    #[test]
    fn perfect_run_ranks_first() {
        let y = [50.0, 51.0, 52.0];
        let b = benchmark(&[
            run("noisy", &y, &[49.0, 52.5, 52.0]),
            run("perfect", &y, &y),
        ])
        .unwrap();
        assert_eq!(b.rows[0].model, "perfect");
        assert_eq!(b.rows[0].metrics.mae, 0.0);
        assert!(b.to_table().lines().nth(1).unwrap().starts_with("perfect"));
        assert_eq!(b.to_csv().lines().count(), 3);
    }

    #[test]
    fn single_run_single_row() {
        let b = benchmark(&[run("only", &[1.0], &[2.0])]).unwrap();
        assert_eq!(b.rows.len(), 1);
    }

    #[test]
    fn mismatched_windows_are_rejected() {
        let a = run("a", &[1.0, 2.0], &[1.0, 2.0]);
        let b = run("b", &[1.0], &[1.0]);
        assert!(matches!(
            benchmark(&[a.clone(), b]),
            Err(Error::Comparison(_))
        ));
        let mut c = a.clone();
        c.split.valid_end = NaiveDate::from_ymd_opt(2020, 6, 30).unwrap();
        assert!(matches!(benchmark(&[a, c]), Err(Error::Comparison(_))));
    }

    #[test]
    fn digest_depends_on_every_field() {
        let base = ConfigDigest::new(5, &["brent".into(), "sent".into()], 1);
        assert_ne!(
            base.digest,
            ConfigDigest::new(6, &["brent".into(), "sent".into()], 1).digest
        );
        assert_ne!(
            base.digest,
            ConfigDigest::new(5, &["brent".into()], 1).digest
        );
        assert_ne!(
            base.digest,
            ConfigDigest::new(5, &["brent".into(), "sent".into()], 2).digest
        );
    }
}
