//! Training instances, cohort splits and per-patient grouping.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureSchema, Featurizer};
use super::metrics::mean_average_precision;
use super::negatives::{negative_pools, sample_negatives, NegativeClass, PoolConfig};
use crate::corpus::Patient;
use crate::error::{Error, Result};
use crate::ontology::{Ontology, TermId};
use crate::seed::{substream, substream_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingInstance {
    pub patient_id: String,
    pub term_id: TermId,
    pub label: u8,
    pub negative_class: NegativeClass,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub per_class_per_positive: usize,
    #[serde(flatten)]
    pub pools: PoolConfig,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            per_class_per_positive: 1,
            pools: PoolConfig::default(),
        }
    }
}

/// Positives followed by sampled negatives for every patient, in cohort
/// order.
pub fn build_instances(
    cohort: &[Patient],
    o: &Ontology,
    featurizer: &Featurizer,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<Vec<RankingInstance>> {
    let per_patient: Vec<Result<Vec<RankingInstance>>> = cohort
        .par_iter()
        .map(|p| {
            if p.curated_terms.is_empty() {
                return Err(Error::Sampling(format!("patient {} has no curated terms", p.patient_id)));
            }
            let pools = negative_pools(o, &p.curated_terms, &cfg.pools)?;
            let patient_seed = substream_seed(seed, &format!("instances/{}", p.patient_id), 0);
            let negatives = sample_negatives(&pools, &p.curated_terms, cfg.per_class_per_positive, patient_seed)
                .map_err(|e| Error::Sampling(format!("patient {}: {e}", p.patient_id)))?;
            p.curated_terms
                .iter()
                .map(|t| (t.clone(), NegativeClass::None))
                .chain(negatives)
                .map(|(t, class)| {
                    Ok(RankingInstance {
                        patient_id: p.patient_id.clone(),
                        features: featurizer.features(p, &t)?,
                        label: u8::from(class == NegativeClass::None),
                        negative_class: class,
                        term_id: t,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_patient {
        out.extend(r?);
    }
    Ok(out)
}

/// Patient-level split; each side keeps cohort order.
pub fn split_cohort(cohort: &[Patient], ratio: f64, seed: u64) -> Result<(Vec<Patient>, Vec<Patient>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} must lie strictly between 0 and 1")));
    }
    if cohort.len() < 5 {
        return Err(Error::Config(format!("need at least 5 patients to split, got {}", cohort.len())));
    }
    let mut ids: Vec<&str> = cohort.iter().map(|p| p.patient_id.as_str()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut substream(seed, "split", 0));
    let n_train = ((cohort.len() as f64 * ratio).round() as usize).clamp(1, cohort.len() - 1);
    let train_ids: BTreeSet<&str> = ids[..n_train].iter().copied().collect();
    let (train, val) = cohort
        .iter()
        .cloned()
        .partition(|p| train_ids.contains(p.patient_id.as_str()));
    Ok((train, val))
}

/// Instance indices per patient, in order of first appearance.
pub fn group_indices(instances: &[RankingInstance]) -> Vec<Vec<usize>> {
    let mut map: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let g = *map.entry(&inst.patient_id).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Within-patient (positive, negative) index pairs.
pub fn pairs(instances: &[RankingInstance], groups: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for g in groups {
        for &p in g.iter().filter(|&&i| instances[i].label == 1) {
            for &n in g.iter().filter(|&&i| instances[i].label == 0) {
                out.push((p, n));
            }
        }
    }
    out
}

/// MAP@k of `scores` (aligned with `instances`) over patient groups.
pub fn map_at_k(instances: &[RankingInstance], scores: &[f64], k: usize) -> f64 {
    let groups = group_indices(instances);
    mean_average_precision(
        groups.iter().map(|g| {
            g.iter()
                .map(|&i| (scores[i], &instances[i].term_id, instances[i].label == 1))
                .collect()
        }),
        k,
    )
}

/// Instance-level cohort in which the `ic` feature separates every positive
/// from every negative; the other features are noise.
pub fn separable_instances(n_patients: usize, seed: u64) -> (FeatureSchema, Vec<RankingInstance>) {
    let schema = FeatureSchema::new(
        ["Neurology", "Cardiology", "Immunology", "Other"]
            .iter()
            .map(|s| s.to_string()),
    );
    let ic = schema.index_of("ic").expect("ic feature");
    let mut rng = substream(seed, "separable", 0);
    let mut out = Vec::new();
    for p in 0..n_patients {
        let pid = format!("S{:05}", p + 1);
        let n_pos = rng.gen_range(2..=8);
        let n_neg = 4 * n_pos;
        let mut patient = vec![0.0; schema.len()];
        patient[0] = rng.gen_range(0.0..70.0);
        patient[1 + rng.gen_range(0..3)] = 1.0;
        patient[4 + rng.gen_range(0..schema.categories.len())] = 1.0;
        // ids shuffled so that the id tie-break carries no label signal
        let mut slots: Vec<usize> = (0..n_pos + n_neg).collect();
        slots.shuffle(&mut rng);
        for (j, slot) in slots.into_iter().enumerate() {
            let positive = j < n_pos;
            let mut f = patient.clone();
            for v in f.iter_mut().skip(ic) {
                *v = rng.gen_range(0.0..3.0);
            }
            f[ic] = if positive { rng.gen_range(6.0..9.0) } else { rng.gen_range(0.5..5.5) };
            let class = if positive {
                NegativeClass::None
            } else {
                NegativeClass::SAMPLED[j % 4]
            };
            out.push(RankingInstance {
                patient_id: pid.clone(),
                term_id: TermId::parse(&format!("HP:{:07}", 2_000_000 + p * 100 + slot)).expect("valid id"),
                label: u8::from(positive),
                negative_class: class,
                features: f,
            });
        }
    }
    (schema, out)
}
