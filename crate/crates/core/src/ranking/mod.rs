//! Learning-to-rank prioritization of candidate terms per patient.

mod boosted;
mod features;
mod instances;
mod linear;
mod metrics;
mod model;
mod negatives;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Patient;
use crate::error::{Error, Result};
use crate::ontology::TermId;

pub use boosted::{train_boosted, BoostHyper};
pub use features::{term_part, FeatureSchema, Featurizer, UNKNOWN_CATEGORY};
pub use instances::{
    build_instances, group_indices, map_at_k, pairs, separable_instances, split_cohort,
    RankingInstance, SamplingConfig,
};
pub use linear::{pairwise_logistic_loss, score_map, sigmoid, softplus, train_pairwise_linear, LinearHyper};
pub use metrics::{average_precision_at_k, mean_average_precision, rank_cmp, rank_order};
pub use model::{
    ModelKind, ModelParams, RankModel, Standardizer, TrainingMeta, Tree, TreeNode,
    MODEL_FORMAT_VERSION,
};
pub use negatives::{negative_pools, sample_negatives, NegativeClass, NegativePools, PoolConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedTerm {
    pub term_id: TermId,
    pub score: f64,
}

/// Validation MAP@30 of each candidate and the index of the chosen one.
/// Ties prefer the linear model, then the earlier candidate.
pub fn select_model(candidates: &[RankModel], validation: &[RankingInstance]) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Training("no candidate models".into()));
    }
    let maps: Vec<f64> = candidates
        .iter()
        .map(|m| score_map(m, validation, 30))
        .collect::<Result<_>>()?;
    let best = (0..candidates.len())
        .min_by(|&a, &b| {
            maps[b]
                .total_cmp(&maps[a])
                .then(candidates[a].kind().cmp(&candidates[b].kind()))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    Ok((best, maps))
}

/// Scores and orders `candidates` for one patient.
pub fn rank_terms(
    model: &RankModel,
    featurizer: &Featurizer,
    patient: &Patient,
    candidates: &BTreeSet<TermId>,
) -> Result<Vec<RankedTerm>> {
    if &model.schema != featurizer.schema() {
        return Err(Error::ArtifactMismatch("model feature schema differs from the featurizer".into()));
    }
    let mut out: Vec<RankedTerm> = candidates
        .iter()
        .map(|t| {
            Ok(RankedTerm {
                term_id: t.clone(),
                score: model.score(&featurizer.features(patient, t)?)?,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| rank_cmp((a.score, &a.term_id), (b.score, &b.term_id)));
    Ok(out)
}

/// Scores every instance in parallel; output aligned with the input.
pub fn score_instances(model: &RankModel, instances: &[RankingInstance]) -> Result<Vec<f64>> {
    instances.par_iter().map(|i| model.score(&i.features)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_prefers_map_then_linear() {
        let (schema, inst) = separable_instances(30, 9);
        let (train, val) = inst.split_at(inst.len() * 4 / 5);
        let lin = train_pairwise_linear(&schema, train, Some(val), &LinearHyper::default(), 0).unwrap();
        let flat = train_pairwise_linear(&schema, train, None, &LinearHyper { epochs: 0, ..LinearHyper::default() }, 0).unwrap();
        let tree = train_boosted(&schema, train, val, &BoostHyper::default(), 0).unwrap();

        let (i, maps) = select_model(std::slice::from_ref(&flat), val).unwrap();
        assert_eq!((i, maps.len()), (0, 1));
        let (i, maps) = select_model(&[flat.clone(), tree.clone(), lin.clone()], val).unwrap();
        assert_eq!(maps[1], 1.0);
        assert_eq!(maps[2], 1.0);
        assert_eq!(i, 2);
        let (i, _) = select_model(&[tree, flat], val).unwrap();
        assert_eq!(i, 0);
    }
}
