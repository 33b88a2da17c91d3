//! Lookup-table baseline: the mean saving seen for each operation
//! composition, ignoring segment statics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{CompositionKey, Dataset, FeatureVector};
use crate::Predictor;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveModel {
    pub table: BTreeMap<CompositionKey, f64>,
    /// Returned for compositions absent from training.
    pub global_mean: f64,
}

pub fn fit_naive(train_set: &Dataset) -> Result<NaiveModel> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sums: BTreeMap<CompositionKey, (f64, usize)> = BTreeMap::new();
    for s in &train_set.samples {
        let e = sums.entry(s.features.key()).or_default();
        e.0 += s.target;
        e.1 += 1;
    }
    let table = sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect();
    let global_mean = train_set.targets().iter().sum::<f64>() / train_set.len() as f64;
    Ok(NaiveModel { table, global_mean })
}

impl NaiveModel {
    pub fn predict_naive(&self, x: &FeatureVector) -> f64 {
        self.table
            .get(&x.key())
            .copied()
            .unwrap_or(self.global_mean)
    }
}

impl Predictor for NaiveModel {
    fn predict(&self, x: &FeatureVector) -> f64 {
        self.predict_naive(x)
    }
}
