use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SourceSpec};
use super::manifest::RunManifest;
use super::CliError;
use crate::dataset::{
    correlate_candidates, fit_scaler, ingest_csv, interpolate, left_join, make_windows,
    AlignedDataset, ColumnRole, ColumnScale, FeatureCorrelation, Scaler, SplitSpec, TimeSeries,
    WindowSpec, RESIDUAL,
};
use crate::decompose::decompose_with;
use crate::ensemble::{
    evaluate_ensemble, run_scenarios, search_weights, write_forecast_csv, EnsembleWeights,
    ForecastSet, ScenarioSpec, SENTIMENT,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    benchmark, metrics_matrix, per_step_metrics, BenchmarkRun, ConfigDigest, Metrics,
};
use crate::models::{CellKind, Checkpoint, InputLayout, Model, ModelSpec};
use crate::numeric::Array2;
use crate::rng::derive_seed;
use crate::training::{train, TrainConfig};

pub const PREPARED: &str = "prepared.csv";
pub const SCALER: &str = "scaler.json";
pub const DECOMPOSITION: &str = "decomposition.csv";
pub const SPLITS: &str = "splits.json";
pub const SELECTION: &str = "selection.json";
pub const WEIGHTS: &str = "weights.json";
pub const ENSEMBLE_METRICS: &str = "ensemble_metrics.json";
pub const FORECASTS: &str = "forecasts.csv";
pub const EVALUATIONS: &str = "evaluations";
pub const ENSEMBLE_NAME: &str = "ers-bi-gru";

/// Which inputs a trained variant sees besides the target price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSet {
    Price,
    Sentiment,
    /// Every feature chosen by the `select` stage.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelVariant {
    pub inputs: InputSet,
    pub cell: CellKind,
    pub bidirectional: bool,
}

impl ModelVariant {
    pub const NAMES: [&'static str; 12] = [
        "gru",
        "lstm",
        "bi-gru",
        "bi-lstm",
        "sent-gru",
        "sent-lstm",
        "sent-bi-gru",
        "sent-bi-lstm",
        "ext-gru",
        "ext-lstm",
        "ext-bi-gru",
        "ext-bi-lstm",
    ];
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.inputs {
            InputSet::Price => "",
            InputSet::Sentiment => "sent-",
            InputSet::External => "ext-",
        };
        let bi = if self.bidirectional { "bi-" } else { "" };
        let cell = match self.cell {
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
        };
        write!(f, "{prefix}{bi}{cell}")
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (inputs, rest) = if let Some(r) = s.strip_prefix("sent-") {
            (InputSet::Sentiment, r)
        } else if let Some(r) = s.strip_prefix("ext-") {
            (InputSet::External, r)
        } else {
            (InputSet::Price, s)
        };
        let (bidirectional, cell) = match rest.strip_prefix("bi-") {
            Some(c) => (true, c),
            None => (false, rest),
        };
        let cell = match cell {
            "gru" => CellKind::Gru,
            "lstm" => CellKind::Lstm,
            _ => {
                return Err(format!(
                    "unknown model `{s}`; valid models: {}",
                    Self::NAMES.join(", ")
                ))
            }
        };
        Ok(Self {
            inputs,
            cell,
            bidirectional,
        })
    }
}

/// Resolved configuration plus where to read and write.
pub struct Context {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub out: PathBuf,
    pub parallel_scenarios: bool,
}

type CmdResult<T> = std::result::Result<T, CliError>;

impl Context {
    fn source_path(&self, s: &SourceSpec) -> PathBuf {
        if s.path.is_absolute() {
            s.path.clone()
        } else {
            self.base_dir.join(&s.path)
        }
    }

    fn out_path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn require(&self, rel: &str, stage: &'static str) -> CmdResult<PathBuf> {
        let path = self.out_path(rel);
        if path.exists() {
            Ok(path)
        } else {
            Err(CliError::Prerequisite {
                stage,
                missing: path,
            })
        }
    }

    fn ensure_dir(&self, rel: &str) -> Result<()> {
        let dir = self.out_path(rel);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let path = self.out_path(rel);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn record(&self, stage: &str, files: Vec<String>) -> Result<()> {
        let digest = self.config.digest();
        let mut manifest = RunManifest::load_or_new(&self.out, &digest)?;
        manifest.record(stage, &digest, files);
        manifest.save(&self.out)
    }

    fn target(&self) -> &str {
        &self.config.target.name
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitSummary {
    name: String,
    start: NaiveDate,
    end: NaiveDate,
    rows: usize,
}

pub fn prepare(ctx: &Context) -> CmdResult<()> {
    let stage = |e| CliError::stage("prepare", e);
    let cfg = &ctx.config;
    let load = |s: &SourceSpec| -> Result<TimeSeries> {
        Ok(
            ingest_csv(&ctx.source_path(s), &s.date_column, &s.value_column)?
                .with_name(s.name.clone()),
        )
    };
    let target = load(&cfg.target).map_err(stage)?;
    let others = cfg
        .candidates
        .iter()
        .map(load)
        .collect::<Result<Vec<_>>>()
        .map_err(stage)?;
    let frame = left_join(&target, &others).map_err(stage)?;
    let filled = frame.missing_cells();
    let raw = interpolate(&frame).map_err(stage)?;
    let ranges = cfg.split.partition(raw.dates()).map_err(stage)?;
    let scaler = fit_scaler(&raw, &cfg.split).map_err(stage)?;
    let scaled = scaler.transform(&raw).map_err(stage)?;
    let dec = decompose_with(
        scaled.target(),
        cfg.decomposition.ma_window,
        cfg.decomposition.mode,
    )
    .map_err(stage)?;

    ctx.ensure_dir("").map_err(stage)?;
    raw.write_csv(&ctx.out_path(PREPARED)).map_err(stage)?;
    ctx.write_json(SCALER, &scaler).map_err(stage)?;
    dec.write_csv(
        &ctx.out_path(DECOMPOSITION),
        scaled.dates(),
        scaled.target(),
    )
    .map_err(stage)?;
    let dates = raw.dates();
    let summary: Vec<SplitSummary> = ranges
        .iter()
        .map(|(name, r)| SplitSummary {
            name: name.into(),
            start: dates[r.start],
            end: dates[r.end - 1],
            rows: r.len(),
        })
        .collect();
    ctx.write_json(SPLITS, &summary).map_err(stage)?;

    println!(
        "prepared {} rows x {} columns ({filled} cells interpolated)",
        raw.len(),
        raw.columns().len()
    );
    for s in &summary {
        println!(
            "  {:<5} {} .. {}  {:>5} rows",
            s.name, s.start, s.end, s.rows
        );
    }
    ctx.record(
        "prepare",
        [PREPARED, SCALER, DECOMPOSITION, SPLITS]
            .map(String::from)
            .to_vec(),
    )
    .map_err(stage)
}

/// Prepared data as later stages consume it.
struct Prepared {
    raw: AlignedDataset,
    scaler: Scaler,
    /// Standardised columns plus the residual.
    scaled: AlignedDataset,
}

fn load_prepared(ctx: &Context, stage: &'static str) -> CmdResult<Prepared> {
    let err = |e| CliError::stage(stage, e);
    let prepared = ctx.require(PREPARED, "prepare")?;
    let scaler_path = ctx.require(SCALER, "prepare")?;
    let dec_path = ctx.require(DECOMPOSITION, "prepare")?;
    let raw = AlignedDataset::read_csv(&prepared, ctx.target()).map_err(err)?;
    let scaler: Scaler = read_json(&scaler_path).map_err(err)?;
    let residual = ingest_csv(&dec_path, "date", RESIDUAL).map_err(err)?;
    let dates_match = residual.dates().eq(raw.dates().iter().copied());
    if !dates_match || residual.missing_count() > 0 {
        return Err(err(Error::Preparation(format!(
            "{} does not line up with {}; rerun `prepare`",
            dec_path.display(),
            prepared.display()
        ))));
    }
    let values = residual
        .points()
        .iter()
        .map(|(_, v)| v.expect("no gaps"))
        .collect();
    let scaled = scaler
        .transform(&raw)
        .and_then(|s| s.with_column(RESIDUAL, ColumnRole::Derived, values))
        .map_err(err)?;
    Ok(Prepared {
        raw,
        scaler,
        scaled,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub threshold: f64,
    pub correlations: Vec<FeatureCorrelation>,
    pub selected: Vec<String>,
}

pub fn select(ctx: &Context) -> CmdResult<()> {
    let err = |e| CliError::stage("select", e);
    let data = load_prepared(ctx, "select")?;
    let threshold = ctx.config.selection_threshold;
    let correlations = correlate_candidates(&data.raw).map_err(err)?;
    let selected: Vec<String> = correlations
        .iter()
        .filter(|c| c.rho.abs() >= threshold)
        .map(|c| c.name.clone())
        .collect();
    for c in &correlations {
        let mark = if c.rho.abs() >= threshold { "*" } else { " " };
        println!("{mark} {:<12} {:>8.4}", c.name, c.rho);
    }
    if selected.is_empty() {
        eprintln!("warning: no candidate reaches |rho| >= {threshold}; selection is empty");
    } else {
        println!("selected: {}", selected.join(", "));
    }
    ctx.write_json(
        SELECTION,
        &Selection {
            threshold,
            correlations,
            selected,
        },
    )
    .map_err(err)?;
    ctx.record("select", vec![SELECTION.into()]).map_err(err)
}

/// Everything `report` needs about one evaluated model, in price units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub model: String,
    pub config: ConfigDigest,
    pub split: SplitSpec,
    pub anchor_dates: Vec<NaiveDate>,
    /// Date of the last forecast step for each sample.
    pub target_dates: Vec<NaiveDate>,
    pub actual: Array2,
    pub predicted: Array2,
    pub metrics: Metrics,
    pub per_step: Vec<Metrics>,
}

impl EvaluationRecord {
    fn new(
        model: &str,
        config: ConfigDigest,
        split: SplitSpec,
        dates: &[NaiveDate],
        anchors: &[usize],
        actual: Array2,
        predicted: Array2,
    ) -> Result<Self> {
        let h = actual.cols();
        Ok(Self {
            model: model.into(),
            config,
            split,
            anchor_dates: anchors.iter().map(|&i| dates[i]).collect(),
            target_dates: anchors.iter().map(|&i| dates[i + h]).collect(),
            metrics: metrics_matrix(&actual, &predicted)?,
            per_step: per_step_metrics(&actual, &predicted)?,
            actual,
            predicted,
        })
    }
}

/// `values[i+1..=i+h]` for each anchor row `i`.
fn future_matrix(values: &[f64], anchors: &[usize], horizon: usize) -> Result<Array2> {
    let mut data = Vec::with_capacity(anchors.len() * horizon);
    for &i in anchors {
        data.extend_from_slice(&values[i + 1..=i + horizon]);
    }
    Array2::new(anchors.len(), horizon, data)
}

fn model_spec(ctx: &Context, variant: ModelVariant, features: usize, seed: u64) -> ModelSpec {
    ModelSpec {
        cell: variant.cell,
        bidirectional: variant.bidirectional,
        input_features: features,
        hidden_size: ctx.config.model.hidden_size,
        head_hidden: ctx.config.model.head_hidden,
        horizon: ctx.config.horizon,
        seed,
    }
}

pub fn train_model(ctx: &Context, variant: ModelVariant) -> CmdResult<()> {
    let name = variant.to_string();
    let err = |e| CliError::stage("train", e);
    let cfg = &ctx.config;
    let data = load_prepared(ctx, "train")?;
    let mut features = vec![ctx.target().to_string()];
    match variant.inputs {
        InputSet::Price => {}
        InputSet::Sentiment => features.push(SENTIMENT.into()),
        InputSet::External => {
            let sel: Selection = read_json(&ctx.require(SELECTION, "select")?).map_err(err)?;
            features.extend(sel.selected.into_iter().filter(|f| f != ctx.target()));
        }
    }
    let windows = make_windows(
        &data.scaled,
        &WindowSpec {
            features: features.clone(),
            target: ctx.target().into(),
            window: cfg.window,
            horizon: cfg.horizon,
        },
        &cfg.split,
    )
    .map_err(err)?;

    let spec = model_spec(
        ctx,
        variant,
        features.len(),
        derive_seed(cfg.seed, &format!("train:{name}:init")),
    );
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, &format!("train:{name}")),
        ..cfg.train.clone()
    };
    let (model, report) = train(
        Model::init(spec).map_err(err)?,
        &windows.train,
        &windows.valid,
        &train_cfg,
    )
    .map_err(err)?;

    let scale = data.scaler.get(ctx.target()).map_err(err)?;
    let anchors: Vec<usize> = windows.test.iter().map(|s| s.anchor_index).collect();
    let predicted = model
        .predict_samples(&windows.test, 256)
        .map_err(err)?
        .map(|v| scale.inverse(v));
    let actual = future_matrix(data.raw.target(), &anchors, cfg.horizon).map_err(err)?;
    let record = EvaluationRecord::new(
        &name,
        ConfigDigest::new(cfg.window, &features, cfg.seed),
        cfg.split,
        data.raw.dates(),
        &anchors,
        actual,
        predicted,
    )
    .map_err(err)?;

    let ckpt = format!("models/{name}.ckpt");
    let report_file = format!("reports/train_{name}.csv");
    let eval_file = format!("{EVALUATIONS}/{name}.json");
    for dir in ["models", "reports", EVALUATIONS] {
        ctx.ensure_dir(dir).map_err(err)?;
    }
    Checkpoint {
        model,
        scaler: Some(data.scaler.clone()),
        layout: Some(InputLayout {
            features,
            target: ctx.target().into(),
            window: cfg.window,
        }),
    }
    .save(&ctx.out_path(&ckpt))
    .map_err(err)?;
    report.write_csv(&ctx.out_path(&report_file)).map_err(err)?;
    ctx.write_json(&eval_file, &record).map_err(err)?;

    println!(
        "{name}: {} epochs ({:?}), best epoch {} valid MSE {:.6}",
        report.epochs.len(),
        report.stop_reason,
        report.best_epoch,
        report.best_valid_mse
    );
    print_metrics(&name, &record.metrics);
    ctx.record(&format!("train:{name}"), vec![ckpt, report_file, eval_file])
        .map_err(err)
}

fn print_metrics(name: &str, m: &Metrics) {
    println!(
        "{name} test: MAE {:.5}  MSE {:.5}  RMSE {:.5}  (n={}, h={})",
        m.mae, m.mse, m.rmse, m.n, m.horizon
    );
}

/// How the fusion weights were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    Search,
    Override,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsFile {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub source: WeightSource,
    pub grid_step: f64,
    pub evaluations: usize,
    /// Validation MSE in price units at these weights.
    pub validation_mse: f64,
}

impl WeightsFile {
    pub fn weights(&self) -> EnsembleWeights {
        EnsembleWeights {
            w1: self.w1,
            w2: self.w2,
            w3: self.w3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitScores {
    pub fused: Metrics,
    pub scenarios: [Metrics; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMetrics {
    pub weights: EnsembleWeights,
    pub validation: SplitScores,
    pub test: SplitScores,
}

/// Either `w1,w2,w3` or a path to a weights JSON document.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsArg {
    Values(EnsembleWeights),
    File(PathBuf),
}

impl FromStr for WeightsArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() == 3 {
            let vals = parts
                .iter()
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| format!("bad weight in `{s}`: {e}"))?;
            return EnsembleWeights::new(vals[0], vals[1], vals[2])
                .map(Self::Values)
                .map_err(|e| e.to_string());
        }
        Ok(Self::File(PathBuf::from(s)))
    }
}

fn anchor_rows(dates: &[NaiveDate], anchors: &[NaiveDate]) -> Result<Vec<usize>> {
    anchors
        .iter()
        .map(|d| {
            dates
                .binary_search(d)
                .map_err(|_| Error::Contract(format!("anchor date {d} not in dataset")))
        })
        .collect()
}

fn scores(
    set: &ForecastSet,
    w: &EnsembleWeights,
    scale: ColumnScale,
    actual: &Array2,
) -> Result<SplitScores> {
    let e = evaluate_ensemble(set, w, scale, actual)?;
    Ok(SplitScores {
        fused: e.fused,
        scenarios: e.scenarios,
    })
}

pub fn ensemble(ctx: &Context, weights: Option<&WeightsArg>) -> CmdResult<()> {
    let err = |e| CliError::stage("ensemble", e);
    let cfg = &ctx.config;
    let data = load_prepared(ctx, "ensemble")?;
    let target = ctx.target();
    let template = model_spec(
        ctx,
        ModelVariant {
            inputs: InputSet::Sentiment,
            cell: CellKind::Gru,
            bidirectional: true,
        },
        2,
        derive_seed(cfg.seed, "ensemble:init"),
    );
    let specs =
        ScenarioSpec::standard_set(&template, cfg.ensemble.scenario2_target).map_err(err)?;
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, "ensemble"),
        ..cfg.train.clone()
    };
    let run = run_scenarios(
        &data.scaled,
        &specs,
        &cfg.split,
        cfg.window,
        &train_cfg,
        ctx.parallel_scenarios,
    )
    .map_err(err)?;

    let scale = data.scaler.get(target).map_err(err)?;
    let dates = data.raw.dates();
    let valid_rows = anchor_rows(dates, &run.valid.anchor_dates).map_err(err)?;
    let test_rows = anchor_rows(dates, &run.test.anchor_dates).map_err(err)?;
    let valid_actual = future_matrix(data.raw.target(), &valid_rows, cfg.horizon).map_err(err)?;
    let test_actual = future_matrix(data.raw.target(), &test_rows, cfg.horizon).map_err(err)?;

    let weights_file = match weights {
        None => {
            let s = search_weights(&run.valid, &valid_actual, scale, cfg.ensemble.grid_step)
                .map_err(err)?;
            WeightsFile {
                w1: s.weights.w1,
                w2: s.weights.w2,
                w3: s.weights.w3,
                source: WeightSource::Search,
                grid_step: cfg.ensemble.grid_step,
                evaluations: s.evaluations,
                validation_mse: s.mse,
            }
        }
        Some(arg) => {
            let w = match arg {
                WeightsArg::Values(w) => *w,
                WeightsArg::File(p) => read_json::<EnsembleWeights>(p).map_err(err)?,
            };
            let v = scores(&run.valid, &w, scale, &valid_actual).map_err(err)?;
            WeightsFile {
                w1: w.w1,
                w2: w.w2,
                w3: w.w3,
                source: WeightSource::Override,
                grid_step: cfg.ensemble.grid_step,
                evaluations: 0,
                validation_mse: v.fused.mse,
            }
        }
    };
    let w = weights_file.weights();
    let metrics = EnsembleMetrics {
        weights: w,
        validation: scores(&run.valid, &w, scale, &valid_actual).map_err(err)?,
        test: scores(&run.test, &w, scale, &test_actual).map_err(err)?,
    };

    for dir in ["ensemble", EVALUATIONS] {
        ctx.ensure_dir(dir).map_err(err)?;
    }
    let mut files = vec![
        WEIGHTS.to_string(),
        ENSEMBLE_METRICS.into(),
        FORECASTS.into(),
    ];
    for ((spec, model), report) in specs.iter().zip(&run.models).zip(&run.reports) {
        let ckpt = format!("ensemble/scenario_{}.ckpt", spec.id);
        let rep = format!("ensemble/train_scenario_{}.csv", spec.id);
        Checkpoint {
            model: model.clone(),
            scaler: Some(data.scaler.clone()),
            layout: Some(InputLayout {
                features: spec.input_columns.clone(),
                target: spec.target.clone(),
                window: cfg.window,
            }),
        }
        .save(&ctx.out_path(&ckpt))
        .map_err(err)?;
        report.write_csv(&ctx.out_path(&rep)).map_err(err)?;
        files.extend([ckpt, rep]);
    }
    ctx.write_json(WEIGHTS, &weights_file).map_err(err)?;
    ctx.write_json(ENSEMBLE_METRICS, &metrics).map_err(err)?;
    write_forecast_csv(&ctx.out_path(FORECASTS), &run.test, &w, scale, &test_actual)
        .map_err(err)?;

    let fused = to_prices(&run.test, &w, scale).map_err(err)?;
    let features: Vec<String> = [target, SENTIMENT, RESIDUAL].map(String::from).to_vec();
    let record = EvaluationRecord::new(
        ENSEMBLE_NAME,
        ConfigDigest::new(cfg.window, &features, cfg.seed),
        cfg.split,
        dates,
        &test_rows,
        test_actual,
        fused,
    )
    .map_err(err)?;
    let eval_file = format!("{EVALUATIONS}/{ENSEMBLE_NAME}.json");
    ctx.write_json(&eval_file, &record).map_err(err)?;
    files.push(eval_file);

    println!(
        "weights ({:?}): w1={} w2={} w3={}  validation MSE {:.6}",
        weights_file.source, w.w1, w.w2, w.w3, weights_file.validation_mse
    );
    for (i, m) in metrics.test.scenarios.iter().enumerate() {
        print_metrics(&format!("scenario {}", i + 1), m);
    }
    print_metrics(ENSEMBLE_NAME, &metrics.test.fused);
    ctx.record("ensemble", files).map_err(err)
}

fn to_prices(set: &ForecastSet, w: &EnsembleWeights, scale: ColumnScale) -> Result<Array2> {
    Ok(crate::ensemble::to_prices(
        &crate::ensemble::fuse(set, w)?,
        scale,
    ))
}

pub fn report(ctx: &Context) -> CmdResult<()> {
    let err = |e| CliError::stage("report", e);
    let dir = ctx.out_path(EVALUATIONS);
    let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        return Err(CliError::Prerequisite {
            stage: "train` or `ensemble",
            missing: dir,
        });
    }
    paths.sort();
    let records = paths
        .iter()
        .map(|p| read_json::<EvaluationRecord>(p))
        .collect::<Result<Vec<_>>>()
        .map_err(err)?;
    let runs: Vec<BenchmarkRun> = records
        .iter()
        .map(|r| BenchmarkRun {
            name: r.model.clone(),
            config: r.config.clone(),
            split: r.split,
            anchor_dates: r.anchor_dates.clone(),
            actual: r.actual.clone(),
            predicted: r.predicted.clone(),
        })
        .collect();
    let bench = benchmark(&runs).map_err(err)?;

    let write = |rel: &str, text: String| -> Result<()> {
        let path = ctx.out_path(rel);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    let mut files = vec!["benchmarks.csv".to_string(), "benchmarks.txt".into()];
    write("benchmarks.csv", bench.to_csv()).map_err(err)?;
    write("benchmarks.txt", bench.to_table()).map_err(err)?;
    for r in &records {
        let h = r.actual.cols() - 1;
        let mut out = String::from("date,actual,predicted\n");
        for (i, d) in r.target_dates.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                d.format("%Y-%m-%d"),
                r.actual.get(i, h),
                r.predicted.get(i, h)
            );
        }
        let rel = format!("plot_{}.csv", r.model);
        write(&rel, out).map_err(err)?;
        files.push(rel);
    }
    print!("{}", bench.to_table());
    ctx.record("report", files).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_name_round_trips() {
        for name in ModelVariant::NAMES {
            assert_eq!(name.parse::<ModelVariant>().unwrap().to_string(), name);
        }
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let e = "tri-gru".parse::<ModelVariant>().unwrap_err();
        assert!(e.contains("sent-bi-gru"));
        assert!("sent-bi-rnn".parse::<ModelVariant>().is_err());
    }

    #[test]
    fn weights_argument_forms() {
        assert_eq!(
            "0,0,1".parse::<WeightsArg>().unwrap(),
            WeightsArg::Values(EnsembleWeights::FORECAST_1)
        );
        assert_eq!(
            "run/weights.json".parse::<WeightsArg>().unwrap(),
            WeightsArg::File("run/weights.json".into())
        );
        assert!("0,x,1".parse::<WeightsArg>().is_err());
    }

    #[test]
    fn future_matrix_offsets() {
        let m = future_matrix(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1, 2], 2).unwrap();
        assert_eq!(m.data(), &[2.0, 3.0, 3.0, 4.0]);
    }
}
