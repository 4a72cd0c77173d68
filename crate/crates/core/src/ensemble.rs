//! Three-scenario residual/sentiment ensemble.
//!
//! | scenario | inputs             | predicts                         |
//! |----------|--------------------|----------------------------------|
//! | 1        | price, sentiment   | price                            |
//! | 2        | residual, sentiment| price (or residual, switchable)  |
//! | 3        | price, residual    | price                            |
//!
//! The final forecast is `(f3 - f2 * w1) * w2 + f1 * w3`, applied
//! elementwise in scaled space and then mapped back to prices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    make_windows, AlignedDataset, ColumnScale, SplitSpec, WindowSpec, WindowedSample, RESIDUAL,
};
use crate::error::{Error, Result};
use crate::evaluation::{metrics_matrix, Metrics};
use crate::models::{Model, ModelSpec};
use crate::numeric::Array2;
use crate::rng::derive_seed;
use crate::training::{train, TrainConfig, TrainReport};

pub const PRICE: &str = "brent";
pub const SENTIMENT: &str = "sent";

/// What scenario 2 is trained to predict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario2Target {
    #[default]
    Price,
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: u8,
    pub input_columns: Vec<String>,
    pub target: String,
    pub model: ModelSpec,
}

/// Input columns for each scenario id.
pub fn scenario_inputs(id: u8) -> Result<[&'static str; 2]> {
    match id {
        1 => Ok([PRICE, SENTIMENT]),
        2 => Ok([RESIDUAL, SENTIMENT]),
        3 => Ok([PRICE, RESIDUAL]),
        other => Err(Error::Parameter(format!(
            "scenario id must be 1, 2 or 3, got {other}"
        ))),
    }
}

impl ScenarioSpec {
    /// The standard scenario `id`. `template` supplies the architecture; its
    /// feature count is fixed to 2 and its seed is replaced by one derived
    /// from `template.seed` and the scenario id.
    pub fn standard(id: u8, template: &ModelSpec, scenario2: Scenario2Target) -> Result<Self> {
        let inputs = scenario_inputs(id)?;
        let target = match (id, scenario2) {
            (2, Scenario2Target::Residual) => RESIDUAL,
            _ => PRICE,
        };
        Ok(Self {
            id,
            input_columns: inputs.iter().map(|s| s.to_string()).collect(),
            target: target.to_string(),
            model: ModelSpec {
                input_features: 2,
                seed: derive_seed(template.seed, &format!("scenario-{id}-init")),
                ..template.clone()
            },
        })
    }

    pub fn standard_set(template: &ModelSpec, scenario2: Scenario2Target) -> Result<[Self; 3]> {
        Ok([
            Self::standard(1, template, scenario2)?,
            Self::standard(2, template, scenario2)?,
            Self::standard(3, template, scenario2)?,
        ])
    }

    pub fn validate(&self) -> Result<()> {
        let expected = scenario_inputs(self.id)?;
        if self.input_columns != expected {
            return Err(Error::Parameter(format!(
                "scenario {} must use inputs {:?}, got {:?}",
                self.id, expected, self.input_columns
            )));
        }
        if self.model.input_features != self.input_columns.len() {
            return Err(Error::Parameter(format!(
                "scenario {} model expects {} features for {} input columns",
                self.id,
                self.model.input_features,
                self.input_columns.len()
            )));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub forecast_1: Array2,
    pub forecast_2: Array2,
    pub forecast_3: Array2,
    pub anchor_dates: Vec<NaiveDate>,
}

impl ForecastSet {
    pub fn new(f1: Array2, f2: Array2, f3: Array2, anchor_dates: Vec<NaiveDate>) -> Result<Self> {
        if f1.shape() != f2.shape() || f1.shape() != f3.shape() {
            return Err(Error::Shape(format!(
                "scenario forecasts disagree in shape: {:?}, {:?}, {:?}",
                f1.shape(),
                f2.shape(),
                f3.shape()
            )));
        }
        if anchor_dates.len() != f1.rows() {
            return Err(Error::Shape(format!(
                "{} anchor dates for {} forecast rows",
                anchor_dates.len(),
                f1.rows()
            )));
        }
        Ok(Self {
            forecast_1: f1,
            forecast_2: f2,
            forecast_3: f3,
            anchor_dates,
        })
    }

    pub fn samples(&self) -> usize {
        self.forecast_1.rows()
    }

    pub fn horizon(&self) -> usize {
        self.forecast_1.cols()
    }

    pub fn scenario(&self, id: u8) -> &Array2 {
        match id {
            1 => &self.forecast_1,
            2 => &self.forecast_2,
            _ => &self.forecast_3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl EnsembleWeights {
    pub const FORECAST_1: Self = Self {
        w1: 0.0,
        w2: 0.0,
        w3: 1.0,
    };
    pub const FORECAST_3: Self = Self {
        w1: 0.0,
        w2: 1.0,
        w3: 0.0,
    };

    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        if ![w1, w2, w3].iter().all(|w| w.is_finite()) {
            return Err(Error::Parameter("fusion weights must be finite".into()));
        }
        Ok(Self { w1, w2, w3 })
    }

    pub fn combine(&self, f1: f64, f2: f64, f3: f64) -> f64 {
        ((f3 - f2 * self.w1) * self.w2) + (f1 * self.w3)
    }
}

/// Elementwise `(f3 - f2 * w1) * w2 + f1 * w3`.
pub fn fuse(forecasts: &ForecastSet, weights: &EnsembleWeights) -> Result<Array2> {
    let (f1, f2, f3) = (
        &forecasts.forecast_1,
        &forecasts.forecast_2,
        &forecasts.forecast_3,
    );
    if f1.shape() != f2.shape() || f1.shape() != f3.shape() {
        return Err(Error::Shape("scenario forecasts are not aligned".into()));
    }
    let data = f1
        .data()
        .iter()
        .zip(f2.data())
        .zip(f3.data())
        .map(|((&a, &b), &c)| weights.combine(a, b, c))
        .collect();
    Array2::new(f1.rows(), f1.cols(), data)
}

/// Weight grid from 0 to 2 inclusive in steps of `step`.
pub fn weight_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Parameter(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let n = (2.0 / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSearch {
    pub weights: EnsembleWeights,
    /// Validation MSE in price units at the chosen weights.
    pub mse: f64,
    pub evaluations: usize,
}

/// Exhaustive grid search over `[0, 2]^3` minimising price-space MSE.
///
/// `targets` are actual prices; forecasts are mapped back through `scale`
/// before comparison. Iteration runs `w1`, then `w2`, then `w3` ascending and
/// only a strictly lower MSE replaces the incumbent, so ties resolve to the
/// lexicographically smallest triple.
pub fn search_weights(
    valid: &ForecastSet,
    targets: &Array2,
    scale: ColumnScale,
    step: f64,
) -> Result<WeightSearch> {
    if valid.samples() == 0 || valid.horizon() == 0 {
        return Err(Error::Contract(
            "weight search needs a non-empty validation set".into(),
        ));
    }
    if targets.shape() != valid.forecast_1.shape() {
        return Err(Error::Shape(format!(
            "targets {:?} vs forecasts {:?}",
            targets.shape(),
            valid.forecast_1.shape()
        )));
    }
    let grid = weight_grid(step)?;
    let (f1, f2, f3, y) = (
        valid.forecast_1.data(),
        valid.forecast_2.data(),
        valid.forecast_3.data(),
        targets.data(),
    );
    let n = y.len() as f64;
    let mut best: Option<(EnsembleWeights, f64)> = None;
    let mut evaluations = 0;
    for &w1 in &grid {
        for &w2 in &grid {
            for &w3 in &grid {
                let w = EnsembleWeights { w1, w2, w3 };
                let mut sq = 0.0;
                for i in 0..y.len() {
                    let e = scale.inverse(w.combine(f1[i], f2[i], f3[i])) - y[i];
                    sq += e * e;
                }
                let mse = sq / n;
                evaluations += 1;
                if best.is_none_or(|(_, b)| mse < b) {
                    best = Some((w, mse));
                }
            }
        }
    }
    let (weights, mse) = best.expect("grid is never empty");
    Ok(WeightSearch {
        weights,
        mse,
        evaluations,
    })
}

/// Everything produced by training the three scenarios.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub valid: ForecastSet,
    pub test: ForecastSet,
    /// Scaled price targets aligned with the forecasts.
    pub valid_targets: Array2,
    pub test_targets: Array2,
    pub models: Vec<Model>,
    pub reports: Vec<TrainReport>,
}

struct TrainedScenario {
    model: Model,
    report: TrainReport,
    valid: Array2,
    test: Array2,
    valid_samples: Vec<WindowedSample>,
    test_samples: Vec<WindowedSample>,
}

fn run_one(
    dataset: &AlignedDataset,
    spec: &ScenarioSpec,
    split: &SplitSpec,
    window: usize,
    config: &TrainConfig,
) -> Result<TrainedScenario> {
    let windows = make_windows(
        dataset,
        &WindowSpec {
            features: spec.input_columns.clone(),
            target: spec.target.clone(),
            window,
            horizon: spec.model.horizon,
        },
        split,
    )?;
    let config = TrainConfig {
        seed: derive_seed(config.seed, &format!("scenario-{}-train", spec.id)),
        ..config.clone()
    };
    let (model, report) = train(
        Model::init(spec.model.clone())?,
        &windows.train,
        &windows.valid,
        &config,
    )?;
    let valid = model.predict_samples(&windows.valid, 256)?;
    let test = model.predict_samples(&windows.test, 256)?;
    Ok(TrainedScenario {
        model,
        report,
        valid,
        test,
        valid_samples: windows.valid,
        test_samples: windows.test,
    })
}

fn price_targets(
    dataset: &AlignedDataset,
    samples: &[WindowedSample],
    horizon: usize,
) -> Result<Array2> {
    let price = dataset.column(PRICE)?;
    let mut data = Vec::with_capacity(samples.len() * horizon);
    for s in samples {
        data.extend_from_slice(&price[s.anchor_index + 1..=s.anchor_index + horizon]);
    }
    Array2::new(samples.len(), horizon, data)
}

/// Trains the three scenarios on a scaled dataset that already carries the
/// residual column, and forecasts the validation and test splits.
///
/// Every scenario's columns are checked before any training starts. With
/// `parallel` the three trainings run on separate threads; results are
/// identical either way.
pub fn run_scenarios(
    dataset: &AlignedDataset,
    specs: &[ScenarioSpec; 3],
    split: &SplitSpec,
    window: usize,
    config: &TrainConfig,
    parallel: bool,
) -> Result<ScenarioRun> {
    let tag = |id: u8| {
        move |e: Error| Error::Scenario {
            scenario: id,
            source: Box::new(e),
        }
    };
    for (expected, spec) in (1u8..).zip(specs) {
        if spec.id != expected {
            return Err(Error::Parameter(format!(
                "scenario specs must be ordered 1, 2, 3; found {} at position {expected}",
                spec.id
            )));
        }
        spec.validate().map_err(tag(spec.id))?;
        for col in spec.input_columns.iter().chain([&spec.target]) {
            dataset.column(col).map_err(tag(spec.id))?;
        }
    }
    if specs
        .iter()
        .any(|s| s.model.horizon != specs[0].model.horizon)
    {
        return Err(Error::Parameter(
            "all scenarios must share one horizon".into(),
        ));
    }
    dataset.column(PRICE)?;

    let results: Vec<Result<TrainedScenario>> = if parallel {
        thread::scope(|scope| {
            let handles: Vec<_> = specs
                .iter()
                .map(|spec| scope.spawn(move || run_one(dataset, spec, split, window, config)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        })
    } else {
        specs
            .iter()
            .map(|spec| run_one(dataset, spec, split, window, config))
            .collect()
    };
    let mut trained = Vec::with_capacity(3);
    for (spec, r) in specs.iter().zip(results) {
        trained.push(r.map_err(tag(spec.id))?);
    }

    let horizon = specs[0].model.horizon;
    let first = &trained[0];
    let valid_targets = price_targets(dataset, &first.valid_samples, horizon)?;
    let test_targets = price_targets(dataset, &first.test_samples, horizon)?;
    let anchors = |s: &[WindowedSample]| s.iter().map(|x| x.anchor_date).collect::<Vec<_>>();
    let valid_anchors = anchors(&first.valid_samples);
    let test_anchors = anchors(&first.test_samples);

    let mut it = trained.into_iter();
    let (t1, t2, t3) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok(ScenarioRun {
        valid: ForecastSet::new(t1.valid, t2.valid, t3.valid, valid_anchors)?,
        test: ForecastSet::new(t1.test, t2.test, t3.test, test_anchors)?,
        valid_targets,
        test_targets,
        models: vec![t1.model, t2.model, t3.model],
        reports: vec![t1.report, t2.report, t3.report],
    })
}

/// Price-space metrics of the fused forecast and of each scenario alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEvaluation {
    pub fused: Metrics,
    pub scenarios: [Metrics; 3],
    /// Fused forecast in price units.
    pub fused_prices: Array2,
}

pub fn to_prices(scaled: &Array2, scale: ColumnScale) -> Array2 {
    scaled.map(|v| scale.inverse(v))
}

/// Fuses `forecasts`, maps everything back to prices and scores it against
/// `actual` (already in price units).
pub fn evaluate_ensemble(
    forecasts: &ForecastSet,
    weights: &EnsembleWeights,
    scale: ColumnScale,
    actual: &Array2,
) -> Result<EnsembleEvaluation> {
    let fused_prices = to_prices(&fuse(forecasts, weights)?, scale);
    let fused = metrics_matrix(actual, &fused_prices)?;
    let score = |id: u8| metrics_matrix(actual, &to_prices(forecasts.scenario(id), scale));
    Ok(EnsembleEvaluation {
        fused,
        scenarios: [score(1)?, score(2)?, score(3)?],
        fused_prices,
    })
}

/// Writes `anchor_date,step,forecast_1,forecast_2,forecast_3,fused,actual`
/// with every forecast mapped through the price scale.
pub fn write_forecast_csv(
    path: &Path,
    forecasts: &ForecastSet,
    weights: &EnsembleWeights,
    scale: ColumnScale,
    actual: &Array2,
) -> Result<()> {
    let fused = to_prices(&fuse(forecasts, weights)?, scale);
    let p = |id: u8| to_prices(forecasts.scenario(id), scale);
    let (p1, p2, p3) = (p(1), p(2), p(3));
    let mut out = String::from("anchor_date,step,forecast_1,forecast_2,forecast_3,fused,actual\n");
    for (r, date) in forecasts.anchor_dates.iter().enumerate() {
        for k in 0..forecasts.horizon() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                date.format("%Y-%m-%d"),
                k + 1,
                p1.get(r, k),
                p2.get(r, k),
                p3.get(r, k),
                fused.get(r, k),
                actual.get(r, k)
            );
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
