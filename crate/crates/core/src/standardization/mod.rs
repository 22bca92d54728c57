//! Mapping mentions to ontology terms by retrieval plus selection.

mod embed;
mod index;
mod select;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::Mention;
use crate::ontology::{Ontology, TermId};

pub use embed::{normalize_text, Embedding, EmbeddingProvider, HashedNgramEmbedder, DEFAULT_DIMENSION};
pub use index::{IndexEntry, ScoredTerm, VectorIndex};
pub use select::{
    parse_selection, selector_prompt, Candidate, RemoteSelector, Selection, Selector,
    ThresholdSelector, DEFAULT_THRESHOLD,
};

pub const DEFAULT_TOP_K: usize = 10;

/// One trace row per mention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizedMention {
    pub patient_id: String,
    pub mention: Mention,
    pub resolved: Option<TermId>,
    pub candidates: Vec<ScoredTerm>,
    pub selector: String,
    pub decision_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Standardization {
    /// Resolved terms per patient in order of first mention.
    pub ordered: BTreeMap<String, Vec<TermId>>,
    pub trace: Vec<StandardizedMention>,
}

impl Standardization {
    pub fn term_sets(&self) -> BTreeMap<String, BTreeSet<TermId>> {
        self.ordered
            .iter()
            .map(|(p, ts)| (p.clone(), ts.iter().cloned().collect()))
            .collect()
    }
}

/// Ranks candidates for `text` and lets `selector` decide.
pub fn standardize_one(
    text: &str,
    o: &Ontology,
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    selector: &dyn Selector,
    k: usize,
) -> Result<(Vec<ScoredTerm>, Selection)> {
    let scored = index.retrieve(provider, text, k)?;
    let candidates = select::to_candidates(&scored, |id| {
        o.term(id)
            .map(|t| (t.name.clone(), t.definition.clone()))
            .unwrap_or_default()
    });
    let sel = selector.select(text, &candidates)?;
    if let Some(r) = &sel.resolved {
        if !scored.iter().any(|s| &s.term_id == r) {
            return Err(Error::Retrieval(format!("selector returned {r} outside the candidates")));
        }
    }
    Ok((scored, sel))
}

/// Standardizes every mention. Per-mention failures are recorded in the
/// trace and the mention is left unresolved.
pub fn standardize_corpus(
    mentions: &BTreeMap<String, Vec<Mention>>,
    o: &Ontology,
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    selector: &dyn Selector,
    k: usize,
    concurrency: usize,
) -> Result<Standardization> {
    let jobs: Vec<(&String, &Mention)> = mentions
        .iter()
        .flat_map(|(p, ms)| ms.iter().map(move |m| (p, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trace: Vec<StandardizedMention> = pool.install(|| {
        jobs.par_iter()
            .map(|(p, m)| {
                let base = StandardizedMention {
                    patient_id: (*p).clone(),
                    mention: (*m).clone(),
                    resolved: None,
                    candidates: Vec::new(),
                    selector: selector.name().to_string(),
                    decision_score: 0.0,
                    warning: None,
                    error: None,
                };
                match standardize_one(&m.surface, o, index, provider, selector, k) {
                    Ok((candidates, sel)) => StandardizedMention {
                        resolved: sel.resolved,
                        candidates,
                        decision_score: sel.decision_score,
                        warning: sel.warning,
                        ..base
                    },
                    Err(e) => StandardizedMention {
                        error: Some(e.to_string()),
                        ..base
                    },
                }
            })
            .collect()
    });

    let mut ordered: BTreeMap<String, Vec<TermId>> =
        mentions.keys().map(|p| (p.clone(), Vec::new())).collect();
    for row in &trace {
        if let Some(t) = &row.resolved {
            let list = ordered.get_mut(&row.patient_id).expect("patient key");
            if !list.contains(t) {
                list.push(t.clone());
            }
        }
    }
    Ok(Standardization { ordered, trace })
}
