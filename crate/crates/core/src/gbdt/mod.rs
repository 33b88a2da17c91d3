//! Gradient-boosted regression trees.
//!
//! Training starts from the mean target and then repeatedly fits a
//! least-squares tree to the current residuals `y - B(x)` (the negative
//! gradient of squared error) and adds it to the ensemble scaled by the
//! learning rate:
//!
//! ```text
//! B_0(x) = mean(y)
//! B_m(x) = B_{m-1}(x) + L * tree_m(x)
//! ```
//!
//! There is no row or column subsampling, so training is deterministic.

mod tree;

pub use tree::{best_split, Split, TreeNode};

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureVector, FEATURE_COUNT};
use crate::Predictor;
use tree::{fit_tree, Columns};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Number of boosting rounds (M).
    pub num_trees: usize,
    /// Shrinkage applied to each tree (L).
    pub learning_rate: f64,
    /// Maximum tree depth (D); a stump has depth 1.
    pub max_depth: usize,
    /// Minimum samples needed to split a node (S).
    pub min_samples_split: usize,
    /// Minimum samples in each leaf (J).
    pub min_samples_leaf: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            num_trees: 350,
            learning_rate: 0.1,
            max_depth: 11,
            min_samples_split: 30,
            min_samples_leaf: 2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if self.max_depth < 1 {
            return bad("max depth must be at least 1".into());
        }
        if self.min_samples_split < 2 {
            return bad(format!(
                "min samples to split must be at least 2, got {}",
                self.min_samples_split
            ));
        }
        if self.min_samples_leaf < 1 {
            return bad("min samples per leaf must be at least 1".into());
        }
        Ok(())
    }
}

/// Trained ensemble: `base + learning_rate * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingModel {
    pub hyperparams: Hyperparams,
    pub base_prediction: f64,
    pub trees: Vec<TreeNode>,
    pub feature_count: usize,
}

impl SavingModel {
    pub fn learning_rate(&self) -> f64 {
        self.hyperparams.learning_rate
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_count {
            return Err(Error::FeatureMismatch {
                expected: self.feature_count,
                actual: row.len(),
            });
        }
        Ok(self.predict_unchecked(|f| row[f]))
    }

    fn predict_unchecked(&self, feature: impl Fn(usize) -> f64 + Copy) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_with(feature)).sum();
        self.base_prediction + self.learning_rate() * sum
    }

    /// Prediction of the first `m` trees only.
    pub fn predict_truncated(&self, row: &[f64], m: usize) -> f64 {
        let sum: f64 = self.trees[..m.min(self.trees.len())]
            .iter()
            .map(|t| t.predict(row))
            .sum();
        self.base_prediction + self.learning_rate() * sum
    }
}

impl Predictor for SavingModel {
    fn predict(&self, x: &FeatureVector) -> f64 {
        debug_assert_eq!(self.feature_count, FEATURE_COUNT);
        let row = x.to_array();
        self.predict_unchecked(|f| row[f])
    }
}

/// Train on a feature dataset.
pub fn train(train_set: &Dataset, hp: &Hyperparams) -> Result<SavingModel> {
    Ok(train_with_history(&train_set.rows(), &train_set.targets(), hp)?.0)
}

/// Train on raw rows.
pub fn train_rows(rows: &[Vec<f64>], targets: &[f64], hp: &Hyperparams) -> Result<SavingModel> {
    Ok(train_with_history(rows, targets, hp)?.0)
}

/// Train and also report the training SSE after each round; entry `m` is
/// the SSE of `B_m`, so the history has `num_trees + 1` entries.
pub fn train_with_history(
    rows: &[Vec<f64>],
    targets: &[f64],
    hp: &Hyperparams,
) -> Result<(SavingModel, Vec<f64>)> {
    hp.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: targets.len(),
        });
    }
    let feature_count = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != feature_count) {
        return Err(Error::FeatureMismatch {
            expected: feature_count,
            actual: bad.len(),
        });
    }
    if rows.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "training data contains non-finite values".into(),
        ));
    }

    let n = rows.len();
    let columns = Columns::new(
        (0..feature_count)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect(),
    );
    let base = targets.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let mut residuals = vec![0.0; n];
    let sse = |fitted: &[f64]| -> f64 {
        fitted
            .iter()
            .zip(targets)
            .map(|(p, y)| (y - p) * (y - p))
            .sum()
    };
    let mut history = Vec::with_capacity(hp.num_trees + 1);
    history.push(sse(&fitted));

    let mut trees = Vec::with_capacity(hp.num_trees);
    for _ in 0..hp.num_trees {
        for i in 0..n {
            residuals[i] = targets[i] - fitted[i];
        }
        let tree = if feature_count == 0 {
            TreeNode::Leaf {
                value: residuals.iter().sum::<f64>() / n as f64,
            }
        } else {
            fit_tree(&columns, &residuals, hp)
        };
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += hp.learning_rate * tree.predict_with(|feat| columns.value(feat, i));
        }
        history.push(sse(&fitted));
        trees.push(tree);
    }
    let model = SavingModel {
        hyperparams: *hp,
        base_prediction: base,
        trees,
        feature_count,
    };
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hp(m: usize, l: f64, d: usize, s: usize, j: usize) -> Hyperparams {
        Hyperparams {
            num_trees: m,
            learning_rate: l,
            max_depth: d,
            min_samples_split: s,
            min_samples_leaf: j,
        }
    }

    #[test]
    fn defaults_are_tuned_configuration() {
        assert_eq!(Hyperparams::default(), hp(350, 0.1, 11, 30, 2));
    }

    #[test]
    fn zero_trees_predict_the_mean() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let model = train_rows(&rows, &[0.1, 0.2, 0.6], &hp(0, 0.1, 3, 2, 1)).unwrap();
        assert!(model.trees.is_empty());
        for x in [-5.0, 0.0, 2.0, 100.0] {
            assert!((model.predict_row(&[x]).unwrap() - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn single_sample_is_reproduced() {
        let model = train_rows(&[vec![4.0, 1.0]], &[0.42], &Hyperparams::default()).unwrap();
        assert_eq!(model.predict_row(&[4.0, 1.0]).unwrap(), 0.42);
        assert_eq!(model.predict_row(&[0.0, 0.0]).unwrap(), 0.42);
    }

    #[test]
    fn separable_data_is_interpolated() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = [0.1, 0.5, 0.2, 0.9];
        let (model, history) = train_with_history(&rows, &y, &hp(3, 1.0, 2, 2, 1)).unwrap();
        for (row, target) in rows.iter().zip(y) {
            assert!((model.predict_row(row).unwrap() - target).abs() < 1e-12);
        }
        assert!(history.last().unwrap().abs() < 1e-24);
    }

    #[test]
    fn stump_prediction_traces_leaves() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let model = train_rows(&rows, &[0.0, 0.0, 10.0, 10.0], &hp(1, 0.5, 1, 2, 1)).unwrap();
        // base 5, leaves -5 / +5 after residuals.
        assert_eq!(model.base_prediction, 5.0);
        assert_eq!(model.predict_row(&[1.0]).unwrap(), 5.0 + 0.5 * -5.0);
        assert_eq!(model.predict_row(&[4.0]).unwrap(), 5.0 + 0.5 * 5.0);
    }

    #[test]
    fn input_errors() {
        let h = Hyperparams::default();
        assert!(matches!(train_rows(&[], &[], &h), Err(Error::EmptyDataset)));
        assert!(matches!(
            train_rows(&[vec![1.0, 2.0], vec![1.0]], &[0.0, 1.0], &h),
            Err(Error::FeatureMismatch { .. })
        ));
        assert!(train_rows(&[vec![1.0]], &[0.0, 1.0], &h).is_err());
        assert!(train_rows(&[vec![f64::NAN]], &[0.0], &h).is_err());
        assert!(train_rows(&[vec![1.0]], &[0.0], &hp(1, 0.0, 1, 2, 1)).is_err());
        assert!(train_rows(&[vec![1.0]], &[0.0], &hp(1, 0.1, 1, 1, 1)).is_err());
        let model = train_rows(&[vec![1.0, 2.0]], &[0.0], &h).unwrap();
        assert!(matches!(
            model.predict_row(&[1.0]),
            Err(Error::FeatureMismatch {
                expected: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 7) as f64, (i / 7) as f64])
            .collect();
        let y: Vec<f64> = (0..50).map(|i| ((i * 13) % 17) as f64 / 17.0).collect();
        let a = train_rows(&rows, &y, &hp(20, 0.3, 3, 4, 2)).unwrap();
        let b = train_rows(&rows, &y, &hp(20, 0.3, 3, 4, 2)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn trees_obey_structural_limits_and_residual_bound(
            data in prop::collection::vec((0u8..6, 0u8..6, 0u8..10), 5..60),
            depth in 1usize..5, split in 2usize..10, leaf in 1usize..4,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|(a, b, _)| vec![*a as f64, *b as f64]).collect();
            let y: Vec<f64> = data.iter().map(|(_, _, t)| *t as f64).collect();
            let params = hp(3, 0.5, depth, split, leaf);
            let model = train_rows(&rows, &y, &params).unwrap();
            for t in &model.trees {
                prop_assert!(t.depth() <= depth);
            }
            // Training SSE never rises, so no fitted value strays from its
            // target by more than the root of the initial SSE. Predictions can
            // leave [min y, max y] when equal rows carry different targets.
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let bound = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt() + 1e-9;
            for (r, t) in rows.iter().zip(&y) {
                let p = model.predict_row(r).unwrap();
                prop_assert!((p - t).abs() <= bound);
            }
        }
    }
}
