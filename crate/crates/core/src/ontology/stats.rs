use std::collections::HashMap;

use super::{Ontology, TermId};
use crate::annotations::AnnotationKB;
use crate::error::{Error, Result};

/// Disease annotation counts and information content per term.
#[derive(Debug, Clone)]
pub struct OntologyStats {
    ids: HashMap<TermId, usize>,
    annot_count: Vec<usize>,
    total_diseases: usize,
    ic: Vec<f64>,
}

/// `-ln(count / total)`, with the add-one ceiling `-ln(1 / (total + 1))`
/// for terms no disease reaches.
pub fn ic_from_count(count: usize, total: usize) -> f64 {
    if count == 0 {
        ((total + 1) as f64).ln()
    } else {
        -(count as f64 / total as f64).ln()
    }
}

/// Propagates each disease's annotations to all ancestors (one count per
/// disease per term) and derives information content from the counts.
pub fn compute_stats(o: &Ontology, kb: &AnnotationKB) -> Result<OntologyStats> {
    let diseases = kb.disease_term_lists(o, None);
    let total = diseases.len();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let annot_count = o.propagated_counts(&diseases);
    let ic = (0..o.len())
        .map(|i| {
            if o.is_live_idx(i) {
                ic_from_count(annot_count[i], total)
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(OntologyStats {
        ids: o.index.clone(),
        annot_count,
        total_diseases: total,
        ic,
    })
}

impl OntologyStats {
    fn idx(&self, id: &TermId) -> Result<usize> {
        match self.ids.get(id) {
            Some(&i) if self.ic[i].is_nan() => Err(Error::ObsoleteTerm(id.to_string())),
            Some(&i) => Ok(i),
            None => Err(Error::UnknownTerm(id.to_string())),
        }
    }

    pub fn ic(&self, id: &TermId) -> Result<f64> {
        Ok(self.ic[self.idx(id)?])
    }

    pub fn annot_count(&self, id: &TermId) -> Result<usize> {
        Ok(self.annot_count[self.idx(id)?])
    }

    /// `annot_count / total_diseases`.
    pub fn probability(&self, id: &TermId) -> Result<f64> {
        Ok(self.annot_count(id)? as f64 / self.total_diseases as f64)
    }

    pub fn total_diseases(&self) -> usize {
        self.total_diseases
    }

    pub(crate) fn ic_at(&self, i: usize) -> f64 {
        self.ic[i]
    }

    pub(crate) fn count_at(&self, i: usize) -> usize {
        self.annot_count[i]
    }
}
