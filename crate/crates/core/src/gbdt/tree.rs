//! Least-squares regression trees.

use super::Hyperparams;

/// Gains closer than this (relative to the node's SSE) count as ties.
pub(crate) const GAIN_TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Samples with `x[feature] <= threshold` go left.
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_with(|f| row[f])
    }

    pub(crate) fn predict_with(&self, feature: impl Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Internal {
                    feature: f,
                    threshold,
                    left,
                    right,
                } => {
                    node = if feature(*f) <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub threshold: f64,
    pub sse_reduction: f64,
}

/// Best threshold on one feature column. Candidates are midpoints between
/// consecutive distinct sorted values; both sides must keep at least
/// `min_samples_leaf` samples. Returns `None` when no candidate reduces SSE.
pub fn best_split(values: &[f64], residuals: &[f64], min_samples_leaf: usize) -> Option<Split> {
    assert_eq!(values.len(), residuals.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    scan_sorted(&order, |i| values[i], residuals, min_samples_leaf)
}

/// Split search over sample ids already sorted by feature value.
pub(crate) fn scan_sorted(
    order: &[usize],
    value: impl Fn(usize) -> f64,
    residuals: &[f64],
    min_samples_leaf: usize,
) -> Option<Split> {
    let n = order.len();
    let min_leaf = min_samples_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let (mut total, mut total_sq) = (0.0, 0.0);
    for &i in order {
        total += residuals[i];
        total_sq += residuals[i] * residuals[i];
    }
    let nf = n as f64;
    let parent = total * total / nf;
    let tolerance = GAIN_TIE_TOLERANCE * (total_sq - parent).max(f64::MIN_POSITIVE);

    let mut best: Option<Split> = None;
    let mut left_sum = 0.0;
    for k in 0..n - 1 {
        left_sum += residuals[order[k]];
        let left_n = k + 1;
        if left_n < min_leaf {
            continue;
        }
        if n - left_n < min_leaf {
            break;
        }
        let (lo, hi) = (value(order[k]), value(order[k + 1]));
        if lo == hi {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / left_n as f64
            + right_sum * right_sum / (n - left_n) as f64
            - parent;
        let floor = best.map_or(0.0, |b| b.sse_reduction);
        if gain > floor + tolerance {
            best = Some(Split {
                threshold: midpoint(lo, hi),
                sse_reduction: gain,
            });
        }
    }
    best
}

/// Midpoint that is guaranteed to separate `lo < hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Column-major training matrix with per-feature presorted sample ids.
pub(crate) struct Columns {
    pub columns: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<usize>>,
}

impl Columns {
    pub fn new(columns: Vec<Vec<f64>>) -> Self {
        let sorted = columns
            .iter()
            .map(|col| {
                let mut order: Vec<usize> = (0..col.len()).collect();
                order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
                order
            })
            .collect();
        Columns { columns, sorted }
    }

    pub fn value(&self, feature: usize, row: usize) -> f64 {
        self.columns[feature][row]
    }
}

/// Greedy recursive fit of one tree to `residuals`. Leaves hold the mean
/// residual of their samples. Growth stops at `max_depth`, below
/// `min_samples_split` samples, or when no split reduces SSE.
pub(crate) fn fit_tree(data: &Columns, residuals: &[f64], hp: &Hyperparams) -> TreeNode {
    grow(data, residuals, hp, data.sorted.clone(), 0)
}

fn grow(
    data: &Columns,
    residuals: &[f64],
    hp: &Hyperparams,
    orders: Vec<Vec<usize>>,
    depth: usize,
) -> TreeNode {
    let members = &orders[0];
    let n = members.len();
    let leaf = || TreeNode::Leaf {
        value: members.iter().map(|&i| residuals[i]).sum::<f64>() / n as f64,
    };
    if depth >= hp.max_depth || n < hp.min_samples_split {
        return leaf();
    }

    // Features in index order with a strict improvement test keep the lowest
    // feature and then the lowest threshold among equal gains.
    let mut best: Option<(usize, Split)> = None;
    let mut tolerance = 0.0;
    for (feature, order) in orders.iter().enumerate() {
        let Some(split) = scan_sorted(
            order,
            |i| data.value(feature, i),
            residuals,
            hp.min_samples_leaf,
        ) else {
            continue;
        };
        if best.is_none() {
            tolerance = node_tolerance(members, residuals);
        }
        let floor = best.map_or(f64::NEG_INFINITY, |(_, b)| b.sse_reduction + tolerance);
        if split.sse_reduction > floor {
            best = Some((feature, split));
        }
    }
    let Some((feature, split)) = best else {
        return leaf();
    };

    let goes_left = |i: usize| data.value(feature, i) <= split.threshold;
    let (mut left, mut right) = (
        Vec::with_capacity(orders.len()),
        Vec::with_capacity(orders.len()),
    );
    for order in &orders {
        let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| goes_left(i));
        left.push(l);
        right.push(r);
    }
    drop(orders);
    TreeNode::Internal {
        feature,
        threshold: split.threshold,
        left: Box::new(grow(data, residuals, hp, left, depth + 1)),
        right: Box::new(grow(data, residuals, hp, right, depth + 1)),
    }
}

fn node_tolerance(members: &[usize], residuals: &[f64]) -> f64 {
    let (mut s, mut sq) = (0.0, 0.0);
    for &i in members {
        s += residuals[i];
        sq += residuals[i] * residuals[i];
    }
    GAIN_TIE_TOLERANCE * (sq - s * s / members.len() as f64).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(depth: usize, split: usize, leaf: usize) -> Hyperparams {
        Hyperparams {
            num_trees: 1,
            learning_rate: 1.0,
            max_depth: depth,
            min_samples_split: split,
            min_samples_leaf: leaf,
        }
    }

    fn leaves(node: &TreeNode, out: &mut Vec<f64>) {
        match node {
            TreeNode::Leaf { value } => out.push(*value),
            TreeNode::Internal { left, right, .. } => {
                leaves(left, out);
                leaves(right, out);
            }
        }
    }

    #[test]
    fn step_function_split() {
        let split = best_split(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 10.0, 10.0], 1).unwrap();
        assert_eq!(split.threshold, 2.5);
        assert!((split.sse_reduction - 100.0).abs() < 1e-12);
    }

    #[test]
    fn unsorted_input_is_sorted_first() {
        let split = best_split(&[4.0, 1.0, 3.0, 2.0], &[10.0, 0.0, 10.0, 0.0], 1).unwrap();
        assert_eq!(split.threshold, 2.5);
    }

    #[test]
    fn no_split_on_constant_feature_or_residuals() {
        assert_eq!(best_split(&[1.0; 5], &[0.0, 1.0, 2.0, 3.0, 4.0], 1), None);
        assert_eq!(best_split(&[1.0, 2.0, 3.0, 4.0], &[7.0; 4], 1), None);
    }

    #[test]
    fn min_leaf_limits_candidates() {
        // Only the middle cut leaves two samples on each side.
        let split = best_split(&[1.0, 2.0, 3.0, 4.0], &[0.0, 10.0, 10.0, 10.0], 2).unwrap();
        assert_eq!(split.threshold, 2.5);
        assert_eq!(best_split(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], 2), None);
    }

    #[test]
    fn equal_gains_take_lowest_threshold() {
        // Cuts at 1.5 and 3.5 reduce SSE by the same amount.
        let split = best_split(&[1.0, 2.0, 3.0, 4.0], &[1.0, -1.0, -1.0, 1.0], 1);
        let s = split.unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn midpoint_separates_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo <= m && m < hi);
    }

    #[test]
    fn stump_leaves_are_means() {
        let data = Columns::new(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let tree = fit_tree(&data, &[0.0, 0.0, 10.0, 10.0], &hp(1, 2, 1));
        let mut values = Vec::new();
        leaves(&tree, &mut values);
        assert_eq!(values, vec![0.0, 10.0]);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn constant_residuals_give_single_leaf() {
        let data = Columns::new(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let tree = fit_tree(&data, &[2.5; 4], &hp(5, 2, 1));
        assert_eq!(tree, TreeNode::Leaf { value: 2.5 });
    }

    #[test]
    fn respects_depth_split_and_leaf_limits() {
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let r: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        let data = Columns::new(vec![x.clone()]);
        let params = hp(3, 10, 4);
        let tree = fit_tree(&data, &r, &params);
        assert!(tree.depth() <= 3);
        // Count samples reaching each leaf and each internal node.
        fn walk(node: &TreeNode, rows: Vec<f64>, p: &Hyperparams) -> usize {
            match node {
                TreeNode::Leaf { .. } => {
                    assert!(rows.len() >= p.min_samples_leaf);
                    rows.len()
                }
                TreeNode::Internal {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    assert!(rows.len() >= p.min_samples_split);
                    let (l, r): (Vec<f64>, Vec<f64>) = rows.iter().partition(|&&v| v <= *threshold);
                    walk(left, l, p) + walk(right, r, p)
                }
            }
        }
        assert_eq!(walk(&tree, x, &params), n);
    }
}
