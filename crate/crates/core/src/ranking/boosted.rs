//! Gradient-boosted regression trees on pairwise logistic gradients.

use serde::{Deserialize, Serialize};

use super::instances::{group_indices, map_at_k, pairs, RankingInstance};
use super::linear::{sigmoid, softplus};
use super::model::{ModelParams, RankModel, Standardizer, TrainingMeta, Tree, TreeNode, MODEL_FORMAT_VERSION};
use super::FeatureSchema;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostHyper {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub rounds: usize,
    /// Minimum instances on each side of a split.
    pub min_leaf: usize,
    pub l1: f64,
    pub l2: f64,
    pub early_stop_patience: usize,
}

impl Default for BoostHyper {
    fn default() -> Self {
        BoostHyper {
            learning_rate: 0.1,
            max_depth: 3,
            rounds: 100,
            min_leaf: 5,
            l1: 0.0,
            l2: 1.0,
            early_stop_patience: 10,
        }
    }
}

fn soft_threshold(g: f64, l1: f64) -> f64 {
    g.signum() * (g.abs() - l1).max(0.0)
}

/// Per-instance gradients and Newton weights of the pairwise logistic loss.
fn gradients(scores: &[f64], pairs: &[(usize, usize)]) -> (Vec<f64>, Vec<f64>) {
    let mut g = vec![0.0; scores.len()];
    let mut h = vec![0.0; scores.len()];
    for &(p, n) in pairs {
        let r = sigmoid(-(scores[p] - scores[n]));
        let w = r * (1.0 - r);
        g[p] -= r;
        g[n] += r;
        h[p] += w;
        h[n] += w;
    }
    (g, h)
}

fn pair_loss(scores: &[f64], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(p, n)| softplus(-(scores[p] - scores[n]))).sum::<f64>() / pairs.len().max(1) as f64
}

struct TreeBuilder<'a> {
    z: &'a [Vec<f64>],
    // instance indices sorted by each feature
    sorted: &'a [Vec<u32>],
    hyper: &'a BoostHyper,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const DONE: u32 = u32::MAX;

impl TreeBuilder<'_> {
    fn objective(&self, g: f64, h: f64) -> f64 {
        let t = soft_threshold(g, self.hyper.l1);
        t * t / (h + self.hyper.l2)
    }

    fn leaf(&self, g: f64, h: f64) -> f64 {
        -self.hyper.learning_rate * soft_threshold(g, self.hyper.l1) / (h + self.hyper.l2)
    }

    /// Level-wise exact greedy growth: one pass over every presorted feature
    /// per level serves all open nodes of that level.
    fn build(&self, g: &[f64], h: &[f64]) -> Tree {
        let n = self.z.len();
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut node_of = vec![0u32; n];
        let mut open: Vec<usize> = vec![0];
        let n_features = self.sorted.len();

        for depth in 0..=self.hyper.max_depth {
            let mut slot = vec![usize::MAX; nodes.len()];
            for (s, &node) in open.iter().enumerate() {
                slot[node] = s;
            }
            let mut totals = vec![(0.0f64, 0.0f64, 0usize); open.len()];
            for i in 0..n {
                if node_of[i] != DONE {
                    let t = &mut totals[slot[node_of[i] as usize]];
                    t.0 += g[i];
                    t.1 += h[i];
                    t.2 += 1;
                }
            }

            let mut best: Vec<Option<Best>> = vec![None; open.len()];
            if depth < self.hyper.max_depth {
                for f in 0..n_features {
                    let mut run = vec![(0.0f64, 0.0f64, 0usize, f64::NAN); open.len()];
                    for &i in &self.sorted[f] {
                        let i = i as usize;
                        if node_of[i] == DONE {
                            continue;
                        }
                        let s = slot[node_of[i] as usize];
                        let v = self.z[i][f];
                        let (gl, hl, cl, last) = run[s];
                        let (gt, ht, ct) = totals[s];
                        if cl >= self.hyper.min_leaf && ct - cl >= self.hyper.min_leaf && v > last {
                            let gain = self.objective(gl, hl) + self.objective(gt - gl, ht - hl) - self.objective(gt, ht);
                            if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                                let mid = last + (v - last) / 2.0;
                                best[s] = Some(Best {
                                    gain,
                                    feature: f,
                                    threshold: if mid > last { mid } else { v },
                                });
                            }
                        }
                        run[s] = (gl + g[i], hl + h[i], cl + 1, v);
                    }
                }
            }

            let mut next_open = Vec::new();
            let mut children = vec![(0usize, 0usize); open.len()];
            for (s, &node) in open.iter().enumerate() {
                match best[s] {
                    Some(b) => {
                        let left = nodes.len();
                        nodes.push(TreeNode::Leaf { value: 0.0 });
                        nodes.push(TreeNode::Leaf { value: 0.0 });
                        nodes[node] = TreeNode::Split {
                            feature: b.feature,
                            threshold: b.threshold,
                            left,
                            right: left + 1,
                        };
                        children[s] = (left, left + 1);
                        next_open.push(left);
                        next_open.push(left + 1);
                    }
                    None => {
                        let (gt, ht, _) = totals[s];
                        nodes[node] = TreeNode::Leaf { value: self.leaf(gt, ht) };
                    }
                }
            }
            for i in 0..n {
                if node_of[i] == DONE {
                    continue;
                }
                let s = slot[node_of[i] as usize];
                node_of[i] = match (best[s], children[s]) {
                    (Some(b), (l, r)) => (if self.z[i][b.feature] < b.threshold { l } else { r }) as u32,
                    (None, _) => DONE,
                };
            }
            if next_open.is_empty() {
                break;
            }
            open = next_open;
        }
        Tree { nodes }
    }
}

pub fn train_boosted(
    schema: &FeatureSchema,
    train: &[RankingInstance],
    validation: &[RankingInstance],
    hyper: &BoostHyper,
    seed: u64,
) -> Result<RankModel> {
    if hyper.max_depth < 1 || hyper.rounds < 1 {
        return Err(Error::Config("boosting needs max_depth >= 1 and rounds >= 1".into()));
    }
    if validation.is_empty() {
        return Err(Error::Training("validation set is empty".into()));
    }
    if train.iter().chain(validation).any(|i| i.features.len() != schema.len()) {
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
    let zv: Vec<Vec<f64>> = validation.iter().map(|i| standardizer.apply(&i.features)).collect();
    let sorted: Vec<Vec<u32>> = (0..schema.len())
        .map(|f| {
            let mut idx: Vec<u32> = (0..z.len() as u32).collect();
            idx.sort_by(|&a, &b| z[a as usize][f].total_cmp(&z[b as usize][f]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let builder = TreeBuilder {
        z: &z,
        sorted: &sorted,
        hyper,
    };

    let mut scores = vec![0.0; z.len()];
    let mut vscores = vec![0.0; zv.len()];
    let mut trees: Vec<Tree> = Vec::new();
    let mut val_history = Vec::new();
    let mut loss_history = Vec::new();
    let mut best_round = 0;
    let mut best_map = f64::NEG_INFINITY;

    for round in 1..=hyper.rounds {
        let (g, h) = gradients(&scores, &pairs);
        let tree = builder.build(&g, &h);
        for (s, x) in scores.iter_mut().zip(&z) {
            *s += tree.predict(x);
        }
        for (s, x) in vscores.iter_mut().zip(&zv) {
            *s += tree.predict(x);
        }
        trees.push(tree);
        loss_history.push(pair_loss(&scores, &pairs));
        let map = map_at_k(validation, &vscores, 30);
        val_history.push(map);
        if map > best_map {
            best_map = map;
            best_round = round;
        } else if round - best_round >= hyper.early_stop_patience {
            break;
        }
    }
    let rounds = trees.len();
    trees.truncate(best_round);
    log::info!("boosting stopped after {rounds} rounds; kept {best_round} (validation MAP@30 {best_map:.4})");

    Ok(RankModel {
        format_version: MODEL_FORMAT_VERSION,
        schema: schema.clone(),
        standardizer,
        params: ModelParams::BoostedTrees { trees },
        meta: TrainingMeta {
            seed,
            rounds,
            best_round,
            validation_map30: Some(best_map),
            validation_history: val_history,
            train_loss_history: loss_history,
            hyperparameters: serde_json::to_value(hyper)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::separable_instances;

    #[test]
    fn stump_has_two_values() {
        let (schema, inst) = separable_instances(30, 5);
        let (train, val) = inst.split_at(inst.len() * 4 / 5);
        let hyper = BoostHyper { rounds: 1, max_depth: 1, ..BoostHyper::default() };
        let m = train_boosted(&schema, train, val, &hyper, 0).unwrap();
        let ModelParams::BoostedTrees { trees } = &m.params else { unreachable!() };
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].depth(), 1);
        let mut distinct: Vec<f64> = inst.iter().map(|i| m.score(&i.features).unwrap()).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert!(distinct.len() <= 2);
    }

    #[test]
    fn hyperparameter_errors() {
        let (schema, inst) = separable_instances(6, 5);
        for hyper in [
            BoostHyper { rounds: 0, ..BoostHyper::default() },
            BoostHyper { max_depth: 0, ..BoostHyper::default() },
        ] {
            assert!(matches!(train_boosted(&schema, &inst, &inst, &hyper, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn best_round_dominates_history() {
        let (schema, inst) = separable_instances(40, 6);
        let (train, val) = inst.split_at(inst.len() * 4 / 5);
        let m = train_boosted(&schema, train, val, &BoostHyper::default(), 0).unwrap();
        let best = m.meta.validation_map30.unwrap();
        assert!(m.meta.validation_history.iter().all(|v| *v <= best));
        assert!(m.meta.best_round >= 1);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn soft_threshold_shrinks() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }
}
