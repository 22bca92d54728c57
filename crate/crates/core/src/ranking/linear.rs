//! Pairwise logistic linear ranker trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::instances::{group_indices, map_at_k, pairs, RankingInstance};
use super::model::{ModelParams, RankModel, Standardizer, TrainingMeta, MODEL_FORMAT_VERSION};
use super::FeatureSchema;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LinearHyper {
    fn default() -> Self {
        LinearHyper {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean over pairs of `ln(1 + exp(-(s_pos - s_neg)))` plus `l2 * |w|^2`,
/// with its gradient.
pub fn pairwise_logistic_loss(w: &[f64], z: &[Vec<f64>], pairs: &[(usize, usize)], l2: f64) -> (f64, Vec<f64>) {
    let scores: Vec<f64> = z.iter().map(|x| dot(w, x)).collect();
    let mut coef = vec![0.0; z.len()];
    let mut loss = 0.0;
    for &(p, n) in pairs {
        let d = scores[p] - scores[n];
        loss += softplus(-d);
        let r = sigmoid(-d);
        coef[p] -= r;
        coef[n] += r;
    }
    let m = pairs.len().max(1) as f64;
    let mut grad: Vec<f64> = w.iter().map(|wi| 2.0 * l2 * wi).collect();
    for (c, x) in coef.iter().zip(z) {
        if *c != 0.0 {
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += c * xi / m;
            }
        }
    }
    (loss / m + l2 * dot(w, w), grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_pairwise_linear(
    schema: &FeatureSchema,
    train: &[RankingInstance],
    validation: Option<&[RankingInstance]>,
    hyper: &LinearHyper,
    seed: u64,
) -> Result<RankModel> {
    if train.iter().any(|i| i.features.len() != schema.len()) {
        return Err(Error::Training("feature length does not match the schema".into()));
    }
    let groups = group_indices(train);
    let pairs = pairs(train, &groups);
    if pairs.is_empty() {
        return Err(Error::Training("no patient has both a positive and a negative".into()));
    }
    let raw: Vec<Vec<f64>> = train.iter().map(|i| i.features.clone()).collect();
    let standardizer = Standardizer::fit(&raw);
    let z: Vec<Vec<f64>> = raw.iter().map(|x| standardizer.apply(x)).collect();

    let mut w = vec![0.0; schema.len()];
    let mut history = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        let (loss, grad) = pairwise_logistic_loss(&w, &z, &pairs, hyper.l2);
        history.push(loss);
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= hyper.learning_rate * g;
        }
    }

    let mut model = RankModel {
        format_version: MODEL_FORMAT_VERSION,
        schema: schema.clone(),
        standardizer,
        params: ModelParams::PairwiseLinear { weights: w },
        meta: TrainingMeta {
            seed,
            rounds: hyper.epochs,
            best_round: hyper.epochs,
            train_loss_history: history,
            hyperparameters: serde_json::to_value(hyper)?,
            ..TrainingMeta::default()
        },
    };
    if let Some(val) = validation {
        model.meta.validation_map30 = Some(score_map(&model, val, 30)?);
    }
    Ok(model)
}

/// MAP@k of a model over instances.
pub fn score_map(model: &RankModel, instances: &[RankingInstance], k: usize) -> Result<f64> {
    let scores: Vec<f64> = instances
        .iter()
        .map(|i| model.score(&i.features))
        .collect::<Result<_>>()?;
    Ok(map_at_k(instances, &scores, k))
}
