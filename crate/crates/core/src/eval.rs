//! Prediction metrics and hyperparameter sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::gbdt::{train, Hyperparams};
use crate::Predictor;

/// Default error tolerance for [`accuracy`].
pub const DEFAULT_TAU: f64 = 0.12;

fn check_lengths(predictions: &[f64], truths: &[f64]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(predictions, truths)?;
    let sse: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, e)| (p - e) * (p - e))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Percentage of predictions within `tau` of the truth, boundary included.
pub fn accuracy(predictions: &[f64], truths: &[f64], tau: f64) -> Result<f64> {
    check_lengths(predictions, truths)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, e)| within(**p, **e, tau))
        .count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// `|p - e| <= tau`, with a few ulps of slack so that a deviation written
/// as exactly `tau` in decimal is not lost to binary rounding of `p - e`.
fn within(p: f64, e: f64, tau: f64) -> bool {
    let slack = 4.0 * f64::EPSILON * p.abs().max(e.abs()).max(tau);
    (p - e).abs() <= tau + slack
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rmse: f64,
    pub accuracy_pct: f64,
    pub tau: f64,
    pub count: usize,
}

impl EvalReport {
    pub fn from_predictions(predictions: &[f64], truths: &[f64], tau: f64) -> Result<Self> {
        Ok(EvalReport {
            rmse: rmse(predictions, truths)?,
            accuracy_pct: accuracy(predictions, truths, tau)?,
            tau,
            count: predictions.len(),
        })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} rmse={:.5} accuracy={:.2}% (tau={})",
            self.count, self.rmse, self.accuracy_pct, self.tau
        )
    }
}

pub fn predict_all(model: &dyn Predictor, data: &Dataset) -> Vec<f64> {
    data.samples
        .iter()
        .map(|s| model.predict(&s.features))
        .collect()
}

pub fn evaluate(model: &dyn Predictor, data: &Dataset, tau: f64) -> Result<EvalReport> {
    EvalReport::from_predictions(&predict_all(model, data), &data.targets(), tau)
}

/// Reports per merging degree (number of operations in the group).
pub fn evaluate_by_degree(
    model: &dyn Predictor,
    data: &Dataset,
    tau: f64,
) -> Result<BTreeMap<u32, EvalReport>> {
    let mut buckets: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in &data.samples {
        let b = buckets.entry(s.features.degree()).or_default();
        b.0.push(model.predict(&s.features));
        b.1.push(s.target);
    }
    buckets
        .into_iter()
        .map(|(d, (p, e))| Ok((d, EvalReport::from_predictions(&p, &e, tau)?)))
        .collect()
}

/// Hyperparameter that a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    NumTrees,
    LearningRate,
    MaxDepth,
    MinSamplesSplit,
    MinSamplesLeaf,
}

impl Axis {
    pub fn symbol(self) -> &'static str {
        match self {
            Axis::NumTrees => "M",
            Axis::LearningRate => "L",
            Axis::MaxDepth => "D",
            Axis::MinSamplesSplit => "S",
            Axis::MinSamplesLeaf => "J",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &Hyperparams, value: f64) -> Result<Hyperparams> {
        let mut hp = *base;
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidArgument(format!(
                    "axis {} needs a whole number, got {value}",
                    self.symbol()
                )))
            }
        };
        match self {
            Axis::NumTrees => hp.num_trees = count()?,
            Axis::LearningRate => hp.learning_rate = value,
            Axis::MaxDepth => hp.max_depth = count()?,
            Axis::MinSamplesSplit => hp.min_samples_split = count()?,
            Axis::MinSamplesLeaf => hp.min_samples_leaf = count()?,
        }
        hp.validate()?;
        Ok(hp)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "M" | "m" | "trees" => Axis::NumTrees,
            "L" | "l" | "learning-rate" => Axis::LearningRate,
            "D" | "d" | "max-depth" => Axis::MaxDepth,
            "S" | "s" | "min-split" => Axis::MinSamplesSplit,
            "J" | "j" | "min-leaf" => Axis::MinSamplesLeaf,
            _ => return Err(Error::InvalidArgument(format!("unknown sweep axis `{s}`"))),
        })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub fixed: Hyperparams,
    pub series: Option<(Axis, Vec<f64>)>,
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>, fixed: Hyperparams) -> Self {
        SweepSpec {
            axis,
            values,
            fixed,
            series: None,
        }
    }

    pub fn with_series(mut self, axis: Axis, values: Vec<f64>) -> Self {
        self.series = Some((axis, values));
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_axis_values(self.axis, &self.values)?;
        if let Some((axis, values)) = &self.series {
            if *axis == self.axis {
                return Err(Error::InvalidArgument(
                    "series axis must differ from the sweep axis".into(),
                ));
            }
            check_axis_values(*axis, values)?;
        }
        Ok(())
    }

    /// Grid in output order: series-major, then axis values.
    fn points(&self) -> Vec<(f64, Option<f64>)> {
        match &self.series {
            None => self.values.iter().map(|&v| (v, None)).collect(),
            Some((_, series)) => series
                .iter()
                .flat_map(|&s| self.values.iter().map(move |&v| (v, Some(s))))
                .collect(),
        }
    }
}

fn check_axis_values(axis: Axis, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("axis {axis} has no values")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} has non-finite values"
        )));
    }
    let up = values.windows(2).all(|w| w[0] < w[1]);
    let down = values.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} values must be strictly ordered"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis: Axis,
    pub series: Option<Axis>,
    pub value: f64,
    pub series_value: Option<f64>,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

/// Train one model per grid point. Points run in parallel; rows come back
/// in grid order.
pub fn sweep(spec: &SweepSpec, train_set: &Dataset, test_set: &Dataset) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let series_axis = spec.series.as_ref().map(|(a, _)| *a);
    spec.points()
        .into_par_iter()
        .map(|(value, series_value)| {
            let run = || -> Result<SweepRow> {
                let mut hp = spec.axis.apply(&spec.fixed, value)?;
                if let (Some(axis), Some(sv)) = (series_axis, series_value) {
                    hp = axis.apply(&hp, sv)?;
                }
                let model = train(train_set, &hp)?;
                Ok(SweepRow {
                    axis: spec.axis,
                    series: series_axis,
                    value,
                    series_value,
                    train_rmse: rmse(&predict_all(&model, train_set), &train_set.targets())?,
                    test_rmse: rmse(&predict_all(&model, test_set), &test_set.targets())?,
                })
            };
            run().map_err(|e| {
                let point = match (series_axis, series_value) {
                    (Some(a), Some(sv)) => format!("{}={value}, {a}={sv}", spec.axis),
                    _ => format!("{}={value}", spec.axis),
                };
                Error::Sweep {
                    point,
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "axis,series,value,series_value,train_rmse,test_rmse";

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<sweep output>", e);
    writeln!(out, "{SWEEP_CSV_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.axis,
            r.series.map(|a| a.symbol()).unwrap_or(""),
            r.value,
            r.series_value.map(|v| v.to_string()).unwrap_or_default(),
            r.train_rmse,
            r.test_rmse
        )
        .map_err(io)?;
    }
    Ok(())
}
