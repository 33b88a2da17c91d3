//! Versioned text format for trained models.
//!
//! ```text
//! taskmerge-model v1
//! kind gbdt
//! features 11
//! num_trees 350
//! learning_rate 0.1
//! max_depth 11
//! min_samples_split 30
//! min_samples_leaf 2
//! base 0.2456
//! tree 0 3
//! split 5 1.5
//! leaf -0.01
//! leaf 0.02
//! ...
//! end
//! ```
//!
//! Trees are written in pre-order: `split <feature> <threshold>` is followed
//! by its left subtree, then its right subtree. The count after `tree <i>`
//! is the number of nodes. Naive models use `kind naive`, a `global_mean`
//! line, and one `entry b s r mpeg4 vp9 hevc mean` line per composition.
//! Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::baseline::NaiveModel;
use crate::error::{Error, Result};
use crate::features::{CompositionKey, FeatureVector};
use crate::gbdt::{Hyperparams, SavingModel, TreeNode};
use crate::Predictor;

pub const MAGIC: &str = "taskmerge-model";
pub const FORMAT_VERSION: u32 = 1;

/// Either kind of model file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Gbdt(SavingModel),
    Naive(NaiveModel),
}

impl AnyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Gbdt(_) => "gbdt",
            AnyModel::Naive(_) => "naive",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} v{FORMAT_VERSION}\nkind {}\n", self.kind());
        match self {
            AnyModel::Gbdt(m) => write_gbdt(m, &mut out),
            AnyModel::Naive(m) => write_naive(m, &mut out),
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (magic, version) = lines.pair("header")?;
        if magic != MAGIC {
            return Err(Error::ModelFormat(format!(
                "not a model file (starts with `{magic}`)"
            )));
        }
        let found: u32 = version
            .strip_prefix('v')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::ModelFormat(format!("bad version tag `{version}`")))?;
        if found != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let kind = lines.keyed("kind")?;
        let model = match kind {
            "gbdt" => AnyModel::Gbdt(read_gbdt(&mut lines)?),
            "naive" => AnyModel::Naive(read_naive(&mut lines)?),
            other => return Err(Error::ModelFormat(format!("unknown model kind `{other}`"))),
        };
        lines.expect_exact("end")?;
        if let Some(extra) = lines.next_line() {
            return Err(Error::ModelFormat(format!(
                "line {}: trailing content after `end`",
                extra.0
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

impl Predictor for AnyModel {
    fn predict(&self, x: &FeatureVector) -> f64 {
        match self {
            AnyModel::Gbdt(m) => m.predict(x),
            AnyModel::Naive(m) => m.predict(x),
        }
    }
}

impl SavingModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        AnyModel::Gbdt(self.clone()).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        match AnyModel::load(path)? {
            AnyModel::Gbdt(m) => Ok(m),
            other => Err(Error::ModelFormat(format!(
                "expected a gbdt model, found {}",
                other.kind()
            ))),
        }
    }

    pub fn to_text(&self) -> String {
        AnyModel::Gbdt(self.clone()).to_text()
    }
}

impl NaiveModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        AnyModel::Naive(self.clone()).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        match AnyModel::load(path)? {
            AnyModel::Naive(m) => Ok(m),
            other => Err(Error::ModelFormat(format!(
                "expected a naive model, found {}",
                other.kind()
            ))),
        }
    }
}

fn write_gbdt(m: &SavingModel, out: &mut String) {
    let hp = &m.hyperparams;
    let _ = writeln!(out, "features {}", m.feature_count);
    let _ = writeln!(out, "num_trees {}", hp.num_trees);
    let _ = writeln!(out, "learning_rate {}", hp.learning_rate);
    let _ = writeln!(out, "max_depth {}", hp.max_depth);
    let _ = writeln!(out, "min_samples_split {}", hp.min_samples_split);
    let _ = writeln!(out, "min_samples_leaf {}", hp.min_samples_leaf);
    let _ = writeln!(out, "base {}", m.base_prediction);
    let _ = writeln!(out, "trees {}", m.trees.len());
    for (i, tree) in m.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {i} {}", tree.node_count());
        write_node(tree, out);
    }
}

fn write_node(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf { value } => {
            let _ = writeln!(out, "leaf {value}");
        }
        TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "split {feature} {threshold}");
            write_node(left, out);
            write_node(right, out);
        }
    }
}

fn write_naive(m: &NaiveModel, out: &mut String) {
    let _ = writeln!(out, "global_mean {}", m.global_mean);
    let _ = writeln!(out, "entries {}", m.table.len());
    for (k, mean) in &m.table {
        let _ = writeln!(
            out,
            "entry {} {} {} {} {} {} {mean}",
            k.b_count, k.s_count, k.r_count, k.mpeg4 as u8, k.vp9 as u8, k.hevc as u8
        );
    }
}

fn read_gbdt(lines: &mut Lines<'_>) -> Result<SavingModel> {
    let feature_count = lines.keyed_parse("features")?;
    let hyperparams = Hyperparams {
        num_trees: lines.keyed_parse("num_trees")?,
        learning_rate: lines.keyed_parse("learning_rate")?,
        max_depth: lines.keyed_parse("max_depth")?,
        min_samples_split: lines.keyed_parse("min_samples_split")?,
        min_samples_leaf: lines.keyed_parse("min_samples_leaf")?,
    };
    hyperparams
        .validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    let base_prediction: f64 = lines.keyed_parse("base")?;
    let count: usize = lines.keyed_parse("trees")?;
    let mut trees = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let (line, rest) = lines.keyed_line("tree")?;
        let mut parts = rest.split_whitespace();
        let index: Option<usize> = parts.next().and_then(|s| s.parse().ok());
        let nodes: Option<usize> = parts.next().and_then(|s| s.parse().ok());
        let (Some(index), Some(nodes), None) = (index, nodes, parts.next()) else {
            return Err(Error::ModelFormat(format!(
                "line {line}: malformed tree header"
            )));
        };
        if index != i {
            return Err(Error::ModelFormat(format!(
                "line {line}: expected tree {i}, found tree {index}"
            )));
        }
        let tree = read_node(lines, feature_count, 0)?;
        if tree.node_count() != nodes {
            return Err(Error::ModelFormat(format!(
                "line {line}: tree {i} declares {nodes} nodes but has {}",
                tree.node_count()
            )));
        }
        trees.push(tree);
    }
    Ok(SavingModel {
        hyperparams,
        base_prediction,
        trees,
        feature_count,
    })
}

fn read_node(lines: &mut Lines<'_>, feature_count: usize, depth: usize) -> Result<TreeNode> {
    if depth > 512 {
        return Err(Error::ModelFormat("tree nesting too deep".into()));
    }
    let (line, text) = lines
        .next_line()
        .ok_or_else(|| Error::ModelFormat("unexpected end of file inside a tree".into()))?;
    let parts: Vec<&str> = text.split_whitespace().collect();
    let bad = || Error::ModelFormat(format!("line {line}: malformed node `{text}`"));
    match parts.as_slice() {
        ["leaf", v] => Ok(TreeNode::Leaf {
            value: parse_finite(v).ok_or_else(bad)?,
        }),
        ["split", f, t] => {
            let feature: usize = f.parse().map_err(|_| bad())?;
            if feature >= feature_count {
                return Err(Error::ModelFormat(format!(
                    "line {line}: feature {feature} out of range"
                )));
            }
            let threshold = parse_finite(t).ok_or_else(bad)?;
            let left = read_node(lines, feature_count, depth + 1)?;
            let right = read_node(lines, feature_count, depth + 1)?;
            Ok(TreeNode::Internal {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(bad()),
    }
}

fn read_naive(lines: &mut Lines<'_>) -> Result<NaiveModel> {
    let global_mean = lines.keyed_parse("global_mean")?;
    let count: usize = lines.keyed_parse("entries")?;
    let mut table = std::collections::BTreeMap::new();
    for _ in 0..count {
        let (line, rest) = lines.keyed_line("entry")?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let bad = || Error::ModelFormat(format!("line {line}: malformed entry"));
        if parts.len() != 7 {
            return Err(bad());
        }
        let int = |i: usize| parts[i].parse::<u32>().map_err(|_| bad());
        let flag = |i: usize| match parts[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad()),
        };
        let key = CompositionKey {
            b_count: int(0)?,
            s_count: int(1)?,
            r_count: int(2)?,
            mpeg4: flag(3)?,
            vp9: flag(4)?,
            hevc: flag(5)?,
        };
        let mean = parse_finite(parts[6]).ok_or_else(bad)?;
        table.insert(key, mean);
    }
    Ok(NaiveModel { table, global_mean })
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Line cursor that skips blank lines and tracks line numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty())
    }

    fn pair(&mut self, what: &str) -> Result<(&'a str, &'a str)> {
        let (line, text) = self
            .next_line()
            .ok_or_else(|| Error::ModelFormat(format!("missing {what}")))?;
        text.split_once(' ')
            .map(|(a, b)| (a, b.trim()))
            .ok_or_else(|| Error::ModelFormat(format!("line {line}: malformed {what}")))
    }

    fn keyed_line(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, text) = self
            .next_line()
            .ok_or_else(|| Error::ModelFormat(format!("truncated file: missing `{key}`")))?;
        match text.split_once(' ') {
            Some((k, rest)) if k == key => Ok((line, rest.trim())),
            _ => Err(Error::ModelFormat(format!(
                "line {line}: expected `{key}`, found `{text}`"
            ))),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        Ok(self.keyed_line(key)?.1)
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, value) = self.keyed_line(key)?;
        value.parse().map_err(|_| {
            Error::ModelFormat(format!("line {line}: bad value for `{key}`: `{value}`"))
        })
    }

    fn expect_exact(&mut self, word: &str) -> Result<()> {
        match self.next_line() {
            Some((_, l)) if l == word => Ok(()),
            Some((line, l)) => Err(Error::ModelFormat(format!(
                "line {line}: expected `{word}`, found `{l}`"
            ))),
            None => Err(Error::ModelFormat(format!(
                "truncated file: missing `{word}`"
            ))),
        }
    }
}
