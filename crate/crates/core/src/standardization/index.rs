//! Exact cosine retrieval over indexed term names and synonyms.

use serde::{Deserialize, Serialize};

use super::embed::{Embedding, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, TermId};

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub term_id: TermId,
    pub text: String,
    pub vector: Embedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term_id: TermId,
    pub score: f64,
}

/// Immutable after build. Holds an inverted list per dimension so a query
/// touches only entries sharing a nonzero coordinate; scores are still
/// exact for every entry.
pub struct VectorIndex {
    provider_name: String,
    dimension: usize,
    entries: Vec<IndexEntry>,
    // distinct term ids in ascending order; entry_term[i] indexes into it
    terms: Vec<TermId>,
    entry_term: Vec<usize>,
    postings: Vec<Vec<(u32, f64)>>,
}

impl VectorIndex {
    /// Indexes the name and each synonym of every live term, ordered by id
    /// then name-first synonym order.
    pub fn build(o: &Ontology, provider: &dyn EmbeddingProvider) -> Result<Self> {
        let texts = o.live_terms().flat_map(|t| {
            std::iter::once((t.id.clone(), t.name.clone()))
                .chain(t.synonyms.iter().map(|s| (t.id.clone(), s.clone())))
        });
        Self::from_texts(texts, provider)
    }

    pub fn from_texts(
        texts: impl IntoIterator<Item = (TermId, String)>,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self> {
        let dimension = provider.dimension();
        if dimension == 0 {
            return Err(Error::Embedding("provider dimension must be positive".into()));
        }
        let mut entries = Vec::new();
        for (term_id, text) in texts {
            let vector = provider
                .embed(&text)
                .map_err(|e| Error::Embedding(format!("term {term_id}: {e}")))?;
            if vector.indices.iter().any(|&i| i as usize >= dimension) {
                return Err(Error::Embedding(format!("term {term_id}: vector exceeds dimension {dimension}")));
            }
            if (vector.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Embedding(format!("term {term_id}: vector is not unit length")));
            }
            entries.push(IndexEntry { term_id, text, vector });
        }
        entries.sort_by(|a, b| a.term_id.cmp(&b.term_id));

        let mut terms: Vec<TermId> = Vec::new();
        let mut entry_term = Vec::with_capacity(entries.len());
        for e in &entries {
            if terms.last() != Some(&e.term_id) {
                terms.push(e.term_id.clone());
            }
            entry_term.push(terms.len() - 1);
        }
        let mut postings = vec![Vec::new(); dimension];
        for (k, e) in entries.iter().enumerate() {
            for (i, v) in e.vector.indices.iter().zip(&e.vector.values) {
                postings[*i as usize].push((k as u32, *v));
            }
        }
        Ok(VectorIndex {
            provider_name: provider.name().to_string(),
            dimension,
            entries,
            terms,
            entry_term,
            postings,
        })
    }

    pub fn provider_name(&self) -> &str {
        &self.provider_name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Top `k` terms by their best entry cosine; ties go to the smaller id.
    pub fn retrieve_vector(&self, query: &Embedding, k: usize) -> Result<Vec<ScoredTerm>> {
        if self.entries.is_empty() {
            return Err(Error::Retrieval("index is empty".into()));
        }
        if k == 0 {
            return Err(Error::Retrieval("k must be at least 1".into()));
        }
        let mut entry_scores = vec![0.0f64; self.entries.len()];
        for (i, qv) in query.indices.iter().zip(&query.values) {
            if let Some(list) = self.postings.get(*i as usize) {
                for &(e, v) in list {
                    entry_scores[e as usize] += qv * v;
                }
            }
        }
        let mut best = vec![f64::NEG_INFINITY; self.terms.len()];
        for (e, s) in entry_scores.iter().enumerate() {
            let t = self.entry_term[e];
            if *s > best[t] {
                best[t] = *s;
            }
        }
        let mut order: Vec<usize> = (0..self.terms.len()).collect();
        order.sort_by(|&a, &b| best[b].total_cmp(&best[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(k)
            .map(|t| ScoredTerm {
                term_id: self.terms[t].clone(),
                score: best[t].clamp(-1.0, 1.0),
            })
            .collect())
    }

    pub fn retrieve(&self, provider: &dyn EmbeddingProvider, query: &str, k: usize) -> Result<Vec<ScoredTerm>> {
        if provider.name() != self.provider_name || provider.dimension() != self.dimension {
            return Err(Error::Retrieval(format!(
                "index built with {} ({} dims), queried with {} ({} dims)",
                self.provider_name,
                self.dimension,
                provider.name(),
                provider.dimension()
            )));
        }
        if self.entries.is_empty() {
            return Err(Error::Retrieval("index is empty".into()));
        }
        let q = provider.embed(query)?;
        self.retrieve_vector(&q, k)
    }
}
