//! Phenotype mention extraction from note chunks.

mod gazetteer;
pub mod markup;
mod prompt;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::NoteChunk;
use crate::error::{Error, Result};
use crate::remote::{ChatClient, RemoteBackendConfig};

pub use gazetteer::Gazetteer;
pub use markup::{
    annotate, escape_markup, parse_span_markup, strip_markup, unescape_markup, IssueKind,
    MarkupIssue, ParsedMarkup,
};
pub use prompt::{render_prompt, PromptExample, PromptTemplate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    Gazetteer,
    Remote,
    ExternalImport,
}

/// A phenotype mention; `start..end` are char offsets into the chunk text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub chunk_id: String,
    pub start: usize,
    pub end: usize,
    pub extractor: ExtractorKind,
}

/// One line of the mentions JSONL export.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub patient_id: String,
    #[serde(flatten)]
    pub mention: Mention,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChunkOutput {
    pub mentions: Vec<Mention>,
    pub recovered: bool,
    pub issues: Vec<MarkupIssue>,
}

/// A per-chunk extraction backend. Implementations are invoked
/// concurrently.
pub trait Extractor: Sync {
    fn extract_chunk(&self, chunk: &NoteChunk) -> Result<ChunkOutput>;
}

/// Prompts a remote chat endpoint and parses its span markup.
pub struct RemoteExtractor {
    client: ChatClient,
    template: PromptTemplate,
}

impl RemoteExtractor {
    pub fn new(cfg: RemoteBackendConfig, template: PromptTemplate) -> Self {
        RemoteExtractor {
            client: ChatClient::new(cfg),
            template,
        }
    }
}

impl Extractor for RemoteExtractor {
    fn extract_chunk(&self, chunk: &NoteChunk) -> Result<ChunkOutput> {
        let prompt = render_prompt(&self.template, &chunk.text)?;
        let reply = self.client.complete(&prompt)?;
        let parsed = parse_span_markup(&chunk.text, &reply, &chunk.chunk_id, ExtractorKind::Remote);
        Ok(ChunkOutput {
            mentions: parsed.mentions,
            recovered: parsed.recovered,
            issues: parsed.issues,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkError {
    pub patient_id: String,
    pub chunk_id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkWarning {
    pub patient_id: String,
    pub chunk_id: String,
    pub recovered: bool,
    pub issues: Vec<MarkupIssue>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusExtraction {
    /// Every patient with at least one chunk has an entry, possibly empty.
    pub mentions: BTreeMap<String, Vec<Mention>>,
    pub errors: Vec<ChunkError>,
    pub warnings: Vec<ChunkWarning>,
}

impl CorpusExtraction {
    pub fn records(&self) -> Vec<MentionRecord> {
        self.mentions
            .iter()
            .flat_map(|(p, ms)| {
                ms.iter().map(|m| MentionRecord {
                    patient_id: p.clone(),
                    mention: m.clone(),
                })
            })
            .collect()
    }

    /// Rebuilds per-patient lists from exported or imported records.
    pub fn from_records(records: impl IntoIterator<Item = MentionRecord>) -> Self {
        let mut mentions: BTreeMap<String, Vec<Mention>> = BTreeMap::new();
        for r in records {
            mentions.entry(r.patient_id).or_default().push(r.mention);
        }
        for ms in mentions.values_mut() {
            normalize(ms);
        }
        CorpusExtraction {
            mentions,
            ..CorpusExtraction::default()
        }
    }
}

fn normalize(ms: &mut Vec<Mention>) {
    ms.sort_by(|a, b| {
        (&a.chunk_id, a.start, a.end, &a.surface).cmp(&(&b.chunk_id, b.start, b.end, &b.surface))
    });
    let mut seen = BTreeSet::new();
    ms.retain(|m| seen.insert((m.surface.to_lowercase(), m.chunk_id.clone(), m.start)));
}

/// Runs `backend` over every chunk with at most `concurrency` chunks in
/// flight. Per-chunk failures are reported without aborting the batch.
pub fn extract_corpus(chunks: &[NoteChunk], backend: &dyn Extractor, concurrency: usize) -> Result<CorpusExtraction> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<ChunkOutput>> =
        pool.install(|| chunks.par_iter().map(|c| backend.extract_chunk(c)).collect());

    let mut out = CorpusExtraction::default();
    for (chunk, result) in chunks.iter().zip(outputs) {
        let list = out.mentions.entry(chunk.patient_id.clone()).or_default();
        match result {
            Ok(o) => {
                if o.recovered || !o.issues.is_empty() {
                    out.warnings.push(ChunkWarning {
                        patient_id: chunk.patient_id.clone(),
                        chunk_id: chunk.chunk_id.clone(),
                        recovered: o.recovered,
                        issues: o.issues,
                    });
                }
                list.extend(o.mentions);
            }
            Err(e) => {
                log::warn!("chunk {} failed: {e}", chunk.chunk_id);
                out.errors.push(ChunkError {
                    patient_id: chunk.patient_id.clone(),
                    chunk_id: chunk.chunk_id.clone(),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    for ms in out.mentions.values_mut() {
        normalize(ms);
    }
    let key = |p: &str, c: &str| (p.to_string(), c.to_string());
    out.errors.sort_by_key(|e| key(&e.patient_id, &e.chunk_id));
    out.warnings.sort_by_key(|w| key(&w.patient_id, &w.chunk_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(p: &str, id: &str, text: &str) -> NoteChunk {
        NoteChunk {
            chunk_id: id.into(),
            note_id: "n".into(),
            patient_id: p.into(),
            text: text.into(),
            start_offset: 0,
            end_offset: text.chars().count(),
        }
    }

    struct Doubler;
    impl Extractor for Doubler {
        fn extract_chunk(&self, chunk: &NoteChunk) -> Result<ChunkOutput> {
            if chunk.text == "boom" {
                return Err(Error::Protocol("bad".into()));
            }
            let m = Mention {
                surface: chunk.text.clone(),
                chunk_id: chunk.chunk_id.clone(),
                start: 0,
                end: chunk.text.chars().count(),
                extractor: ExtractorKind::Gazetteer,
            };
            let mut twin = m.clone();
            twin.surface = twin.surface.to_uppercase();
            Ok(ChunkOutput { mentions: vec![m, twin], ..ChunkOutput::default() })
        }
    }

    #[test]
    fn empty_and_dedup() {
        assert!(extract_corpus(&[], &Doubler, 4).unwrap().mentions.is_empty());
        let r = extract_corpus(&[chunk("P1", "c1", "ab")], &Doubler, 1).unwrap();
        assert_eq!(r.mentions["P1"].len(), 1);
    }

    #[test]
    fn errors_do_not_abort_and_order_is_stable() {
        let chunks: Vec<NoteChunk> = (0..40)
            .map(|i| chunk(&format!("P{}", i % 3), &format!("c{i:02}"), if i == 7 { "boom" } else { "x" }))
            .rev()
            .collect();
        let a = extract_corpus(&chunks, &Doubler, 1).unwrap();
        let b = extract_corpus(&chunks, &Doubler, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.errors.len(), 1);
        assert_eq!(a.errors[0].kind, "protocol");
        let ids: Vec<&str> = a.mentions["P0"].iter().map(|m| m.chunk_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn record_round_trip() {
        let r = extract_corpus(&[chunk("P1", "c1", "ab"), chunk("P2", "c2", "cd")], &Doubler, 2).unwrap();
        let line = serde_json::to_string(&r.records()[0]).unwrap();
        assert!(line.contains("\"patient_id\":\"P1\"") && line.contains("\"extractor\":\"gazetteer\""));
        assert_eq!(CorpusExtraction::from_records(r.records()).mentions, r.mentions);
    }
}
