//! Choosing one candidate (or none) for a mention.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ScoredTerm;
use crate::error::{Error, Result};
use crate::ontology::TermId;
use crate::remote::{ChatClient, RemoteBackendConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.35;

/// A retrieved candidate with the text shown to a selector.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub term_id: TermId,
    pub score: f64,
    pub name: String,
    pub definition: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub resolved: Option<TermId>,
    pub decision_score: f64,
    pub warning: Option<String>,
}

pub trait Selector: Sync {
    fn name(&self) -> &str;
    /// `candidates` is non-empty and sorted by descending score.
    fn select(&self, mention: &str, candidates: &[Candidate]) -> Result<Selection>;
}

/// Takes the top candidate when its cosine reaches the threshold.
#[derive(Clone, Debug)]
pub struct ThresholdSelector {
    pub threshold: f64,
}

impl Default for ThresholdSelector {
    fn default() -> Self {
        ThresholdSelector {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Selector for ThresholdSelector {
    fn name(&self) -> &str {
        "threshold"
    }

    fn select(&self, _mention: &str, candidates: &[Candidate]) -> Result<Selection> {
        let top = candidates
            .first()
            .ok_or_else(|| Error::Retrieval("no candidates".into()))?;
        Ok(Selection {
            resolved: (top.score >= self.threshold).then(|| top.term_id.clone()),
            decision_score: top.score,
            warning: None,
        })
    }
}

static ID_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"HP:\d{7}").expect("static pattern"));
static NONE_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bnone\b").expect("static pattern"));

/// Asks a remote model to pick among the candidates by id.
pub struct RemoteSelector {
    client: ChatClient,
}

impl RemoteSelector {
    pub fn new(cfg: RemoteBackendConfig) -> Self {
        RemoteSelector {
            client: ChatClient::new(cfg),
        }
    }
}

pub fn selector_prompt(mention: &str, candidates: &[Candidate]) -> String {
    let mut p = format!(
        "Select the Human Phenotype Ontology term that best matches the phenotype mention \"{mention}\".\n\
         Answer with the term id only, or \"none\" if no candidate is appropriate.\n\nCandidates:\n"
    );
    for c in candidates {
        p.push_str(&format!("{} | {}", c.term_id, c.name));
        if !c.definition.is_empty() {
            p.push_str(&format!(" | {}", c.definition));
        }
        p.push('\n');
    }
    p
}

/// Reads an id or "none" from a model reply. Ids outside the candidates are
/// rejected.
pub fn parse_selection(reply: &str, candidates: &[Candidate]) -> Selection {
    let id = ID_PATTERN.find(reply).map(|m| m.as_str());
    match id {
        Some(id) => match candidates.iter().find(|c| c.term_id.as_str() == id) {
            Some(c) => Selection {
                resolved: Some(c.term_id.clone()),
                decision_score: c.score,
                warning: None,
            },
            None => Selection {
                resolved: None,
                decision_score: 0.0,
                warning: Some(format!("selected {id} is not among the candidates")),
            },
        },
        None => Selection {
            resolved: None,
            decision_score: 0.0,
            warning: (!NONE_PATTERN.is_match(reply)).then(|| format!("unparseable reply {:?}", reply.trim())),
        },
    }
}

impl Selector for RemoteSelector {
    fn name(&self) -> &str {
        "remote"
    }

    fn select(&self, mention: &str, candidates: &[Candidate]) -> Result<Selection> {
        if candidates.is_empty() {
            return Err(Error::Retrieval("no candidates".into()));
        }
        let reply = self.client.complete(&selector_prompt(mention, candidates))?;
        let sel = parse_selection(&reply, candidates);
        if let Some(w) = &sel.warning {
            log::warn!("selector for {mention:?}: {w}");
        }
        Ok(sel)
    }
}

pub(crate) fn to_candidates(scored: &[ScoredTerm], lookup: impl Fn(&TermId) -> (String, String)) -> Vec<Candidate> {
    scored
        .iter()
        .map(|s| {
            let (name, definition) = lookup(&s.term_id);
            Candidate {
                term_id: s.term_id.clone(),
                score: s.score,
                name,
                definition,
            }
        })
        .collect()
}
