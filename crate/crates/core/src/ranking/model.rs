//! Serializable ranking models.

use serde::{Deserialize, Serialize};

use super::features::FeatureSchema;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-feature affine transform fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation; constant columns get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary tree; node 0 is the root. Values below the threshold go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PairwiseLinear,
    BoostedTrees,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    PairwiseLinear { weights: Vec<f64> },
    BoostedTrees { trees: Vec<Tree> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    /// Epochs or boosting rounds run.
    pub rounds: usize,
    /// Round kept in the final model (boosting only).
    pub best_round: usize,
    pub validation_map30: Option<f64>,
    /// Validation MAP@30 after each boosting round.
    #[serde(default)]
    pub validation_history: Vec<f64>,
    /// Training pairwise loss after each round.
    #[serde(default)]
    pub train_loss_history: Vec<f64>,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub standardizer: Standardizer,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

impl RankModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::PairwiseLinear { .. } => ModelKind::PairwiseLinear,
            ModelParams::BoostedTrees { .. } => ModelKind::BoostedTrees,
        }
    }

    /// Score of an already standardized feature vector.
    pub fn score_standardized(&self, z: &[f64]) -> f64 {
        match &self.params {
            ModelParams::PairwiseLinear { weights } => weights.iter().zip(z).map(|(w, x)| w * x).sum(),
            ModelParams::BoostedTrees { trees } => trees.iter().map(|t| t.predict(z)).sum(),
        }
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.schema.len() {
            return Err(Error::ArtifactMismatch(format!(
                "feature vector has {} values, model expects {}",
                features.len(),
                self.schema.len()
            )));
        }
        Ok(self.score_standardized(&self.standardizer.apply(features)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(Error::ArtifactMismatch(format!(
                "model format version {version:?}, expected {MODEL_FORMAT_VERSION}"
            )));
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_constant_column() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn stump_prediction() {
        let t = Tree {
            nodes: vec![
                TreeNode::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                TreeNode::Leaf { value: -1.0 },
                TreeNode::Leaf { value: 2.0 },
            ],
        };
        assert_eq!(t.predict(&[0.0]), -1.0);
        assert_eq!(t.predict(&[0.5]), 2.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn version_is_checked() {
        let m = RankModel {
            format_version: MODEL_FORMAT_VERSION,
            schema: FeatureSchema::new(Vec::new()),
            standardizer: Standardizer::fit(&[vec![0.0; 12]]),
            params: ModelParams::PairwiseLinear { weights: vec![0.1; 12] },
            meta: TrainingMeta::default(),
        };
        let text = m.to_json().unwrap();
        assert_eq!(RankModel::from_json(&text).unwrap(), m);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(RankModel::from_json(&bumped), Err(Error::ArtifactMismatch(_))));
    }
}
