//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use oilcast::dataset::{AlignedDataset, Column, ColumnRole};
use oilcast::rng::seeded;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

pub fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn daily(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    (0..n).map(|i| start + Days::new(i as u64)).collect()
}

/// Average ranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    oracle_pearson(&oracle_ranks(x), &oracle_ranks(y))
}

/// (mae, mse, rmse) by an explicit loop.
pub fn oracle_metrics(y: &[f64], p: &[f64]) -> (f64, f64, f64) {
    let mut abs = 0.0;
    let mut sq = 0.0;
    for i in 0..y.len() {
        abs += (y[i] - p[i]).abs();
        sq += (y[i] - p[i]).powi(2);
    }
    let n = y.len() as f64;
    (abs / n, sq / n, (sq / n).sqrt())
}

/// `amplitude * sin(2 pi t / period)` plus Gaussian noise.
pub fn noisy_sine(n: usize, period: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|t| (std::f64::consts::TAU * t as f64 / period).sin() + noise.sample(&mut rng))
        .collect()
}

pub fn single_column(name: &str, dates: Vec<NaiveDate>, values: Vec<f64>) -> AlignedDataset {
    AlignedDataset::new(
        dates,
        vec![Column {
            name: name.into(),
            role: ColumnRole::Target,
            values,
        }],
    )
    .unwrap()
}

/// Writes brent/sent/usdx/noise CSVs (daily from 2019-01-01, `n` rows) and
/// a config that trains tiny models quickly. Returns the config path.
pub fn write_synthetic_experiment(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let dates = daily(day(2019, 1, 1), n);
    let mut level = 0.0;
    let mut brent = Vec::with_capacity(n);
    for t in 0..n {
        level = 0.9 * level + 0.6 * noise.sample(&mut rng);
        brent.push(62.0 + 8.0 * (t as f64 / 23.0).sin() + level);
    }
    let sent: Vec<f64> = brent
        .iter()
        .map(|b| 0.2 * b + 0.4 * noise.sample(&mut rng))
        .collect();
    let usdx: Vec<f64> = brent
        .iter()
        .map(|b| 120.0 - 0.5 * b + noise.sample(&mut rng))
        .collect();
    let junk: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let write = |name: &str, values: &[f64], gaps: &[usize]| {
        let mut out = String::from("date,value\n");
        for (i, (d, v)) in dates.iter().zip(values).enumerate() {
            if gaps.contains(&i) {
                let _ = writeln!(out, "{d},");
            } else {
                let _ = writeln!(out, "{d},{v}");
            }
        }
        fs::write(data.join(format!("{name}.csv")), out).unwrap();
    };
    write("brent", &brent, &[]);
    write("sent", &sent, &[10, 11, 40]);
    write("usdx", &usdx, &[0, 77]);
    write("noise", &junk, &[]);

    let config = r#"{
  "target": {"name": "brent", "path": "data/brent.csv"},
  "candidates": [
    {"name": "sent", "path": "data/sent.csv"},
    {"name": "usdx", "path": "data/usdx.csv"},
    {"name": "noise", "path": "data/noise.csv"}
  ],
  "split": {"train_end": "2019-08-31", "valid_end": "2019-10-31"},
  "decomposition": {"mode": "centered", "ma_window": 9},
  "model": {"hidden_size": 6, "head_hidden": 6},
  "train": {"max_epochs": 4, "patience": 3, "learning_rate": 0.005},
  "ensemble": {"grid_step": 0.25},
  "seed": 11
}
"#;
    let path = dir.join("experiment.json");
    fs::write(&path, config).unwrap();
    path
}
