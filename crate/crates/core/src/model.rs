//! Black-box predictors `f: R^d -> [0, 1]` and their JSON descriptions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An opaque predictor. Implementations must be callable from several
/// worker threads at once.
pub trait Model: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;

    /// Columns the model may read. `None` means "any column". Columns outside
    /// this set are null players and are skipped by the exact enumeration.
    fn active_features(&self) -> Option<Vec<usize>> {
        None
    }

    fn predict_many(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn predict(&self, x: &[f64]) -> f64 {
        (**self).predict(x)
    }
    fn active_features(&self) -> Option<Vec<usize>> {
        (**self).active_features()
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn predict(&self, x: &[f64]) -> f64 {
        (**self).predict(x)
    }
    fn active_features(&self) -> Option<Vec<usize>> {
        (**self).active_features()
    }
}

/// Wraps a closure as a [`Model`].
pub struct FnModel<F> {
    f: F,
    active: Option<Vec<usize>>,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, active: None }
    }

    /// Declares that only `active` columns are ever read.
    pub fn with_active(f: F, active: Vec<usize>) -> Self {
        Self {
            f,
            active: Some(active),
        }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn active_features(&self) -> Option<Vec<usize>> {
        self.active.clone()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        Self {
            feature: None,
            threshold: None,
            left: None,
            right: None,
            value: Some(value),
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Self {
        Self {
            feature: Some(feature),
            threshold: Some(threshold),
            left: Some(left),
            right: Some(right),
            value: None,
        }
    }

    fn is_leaf(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

/// A binary tree stored as a node list rooted at index 0. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            let node = &self.nodes[k];
            match (node.feature, node.threshold, node.left, node.right) {
                (Some(f), Some(t), Some(l), Some(r)) => {
                    k = if x[f] <= t { l } else { r };
                }
                _ => return node.value.unwrap_or(0.0),
            }
        }
    }

    fn validate(&self, tree_idx: usize) -> Result<()> {
        let ctx = |node: usize| format!("trees[{tree_idx}].nodes[{node}]");
        if self.nodes.is_empty() {
            return Err(Error::parse(format!("trees[{tree_idx}]"), "tree has no nodes"));
        }
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            if seen[k] {
                return Err(Error::parse(ctx(k), "node reached twice (not a tree)"));
            }
            seen[k] = true;
            let node = &self.nodes[k];
            if node.is_leaf() {
                let v = node
                    .value
                    .ok_or_else(|| Error::parse(ctx(k), "leaf without value"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::parse(ctx(k), format!("leaf value {v} outside [0, 1]")));
                }
                continue;
            }
            let (Some(_), Some(t), Some(l), Some(r)) =
                (node.feature, node.threshold, node.left, node.right)
            else {
                return Err(Error::parse(
                    ctx(k),
                    "internal node needs feature, threshold, left and right",
                ));
            };
            if !t.is_finite() {
                return Err(Error::parse(ctx(k), "non-finite threshold"));
            }
            for child in [l, r] {
                if child >= n {
                    return Err(Error::parse(ctx(k), format!("child {child} out of range")));
                }
                stack.push(child);
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::parse(ctx(orphan), "node unreachable from root"));
        }
        Ok(())
    }
}

/// Constants of the toy hiring rule `P(H, M) = [1 + exp(a·1(H < h0) − b·(M − m0))]⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdToy {
    pub height_index: usize,
    pub mass_index: usize,
    #[serde(default = "ThresholdToy::default_penalty")]
    pub penalty: f64,
    #[serde(default = "ThresholdToy::default_min_height")]
    pub min_height: f64,
    #[serde(default = "ThresholdToy::default_slope")]
    pub slope: f64,
    #[serde(default = "ThresholdToy::default_mass_offset")]
    pub mass_offset: f64,
}

impl ThresholdToy {
    fn default_penalty() -> f64 {
        100.0
    }
    fn default_min_height() -> f64 {
        160.0
    }
    fn default_slope() -> f64 {
        0.3
    }
    fn default_mass_offset() -> f64 {
        28.0
    }

    pub fn new(height_index: usize, mass_index: usize) -> Self {
        Self {
            height_index,
            mass_index,
            penalty: 100.0,
            min_height: 160.0,
            slope: 0.3,
            mass_offset: 28.0,
        }
    }

    pub fn probability(&self, height: f64, mass: f64) -> f64 {
        let short = if height < self.min_height { 1.0 } else { 0.0 };
        sigmoid(-(self.penalty * short - self.slope * (mass - self.mass_offset)))
    }
}

/// Serializable model description: `{"kind": ..., "params": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ModelSpec {
    Logistic { weights: Vec<f64>, bias: f64 },
    /// Prediction is the mean of the trees' leaf values.
    TreeEnsemble(Vec<Tree>),
    ThresholdToy(ThresholdToy),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Logistic { weights, bias } => {
                if weights.is_empty() {
                    return Err(Error::parse("params.weights", "empty weight vector"));
                }
                if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
                    return Err(Error::parse(format!("params.weights[{i}]"), "non-finite weight"));
                }
                if !bias.is_finite() {
                    return Err(Error::parse("params.bias", "non-finite bias"));
                }
            }
            ModelSpec::TreeEnsemble(trees) => {
                if trees.is_empty() {
                    return Err(Error::parse("params", "tree ensemble has no trees"));
                }
                for (i, t) in trees.iter().enumerate() {
                    t.validate(i)?;
                }
            }
            ModelSpec::ThresholdToy(toy) => {
                for (name, v) in [
                    ("penalty", toy.penalty),
                    ("min_height", toy.min_height),
                    ("slope", toy.slope),
                    ("mass_offset", toy.mass_offset),
                ] {
                    if !v.is_finite() {
                        return Err(Error::parse(format!("params.{name}"), "non-finite constant"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest input width the model can be evaluated on.
    pub fn min_features(&self) -> usize {
        match self {
            ModelSpec::Logistic { weights, .. } => weights.len(),
            ModelSpec::TreeEnsemble(trees) => trees
                .iter()
                .flat_map(|t| t.nodes.iter().filter_map(|n| n.feature))
                .max()
                .map_or(0, |f| f + 1),
            ModelSpec::ThresholdToy(t) => t.height_index.max(t.mass_index) + 1,
        }
    }

    /// The same model on `d` inputs; a logistic model gains zero weights,
    /// the other kinds ignore extra columns already.
    pub fn padded(self, d: usize) -> Result<Self> {
        if d < self.min_features() {
            return Err(Error::arg(format!(
                "cannot shrink a model reading {} features to {d}",
                self.min_features()
            )));
        }
        Ok(match self {
            ModelSpec::Logistic { mut weights, bias } => {
                weights.resize(d, 0.0);
                ModelSpec::Logistic { weights, bias }
            }
            other => other,
        })
    }

    /// SHA-256 over the canonical JSON encoding, hex-encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model spec serializes");
        hex(&Sha256::digest(bytes))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(s)
            .map_err(|e| Error::parse(format!("model json line {} column {}", e.line(), e.column()), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { context, message } => Error::Parse {
                context: format!("{}: {context}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Model for ModelSpec {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            ModelSpec::Logistic { weights, bias } => {
                let t = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                sigmoid(t)
            }
            ModelSpec::TreeEnsemble(trees) => {
                trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64
            }
            ModelSpec::ThresholdToy(toy) => toy.probability(x[toy.height_index], x[toy.mass_index]),
        }
    }

    fn active_features(&self) -> Option<Vec<usize>> {
        let mut active: Vec<usize> = match self {
            ModelSpec::Logistic { weights, .. } => weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, _)| i)
                .collect(),
            ModelSpec::TreeEnsemble(trees) => trees
                .iter()
                .flat_map(|t| t.nodes.iter().filter_map(|n| n.feature))
                .collect(),
            ModelSpec::ThresholdToy(t) => vec![t.height_index, t.mass_index],
        };
        active.sort_unstable();
        active.dedup();
        Some(active)
    }
}

/// Reads and validates a model description.
pub fn load_model_json(path: impl AsRef<Path>) -> Result<ModelSpec> {
    ModelSpec::load(path)
}
