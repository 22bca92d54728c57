//! Dictionary matcher over ontology names and synonyms.

use aho_corasick::AhoCorasick;

use super::markup::fold_case;
use super::{ChunkOutput, Extractor, ExtractorKind, Mention};
use crate::corpus::NoteChunk;
use crate::error::Result;
use crate::ontology::Ontology;
use crate::text::char_slice;

/// Case-insensitive, word-bounded, longest-match-first matcher.
pub struct Gazetteer {
    patterns: Vec<String>,
    matcher: AhoCorasick,
}

impl Gazetteer {
    /// Lexicon of every live term's name and synonyms, root excluded.
    pub fn from_ontology(o: &Ontology) -> Self {
        let entries = o
            .live_terms()
            .filter(|t| &t.id != o.root())
            .flat_map(|t| std::iter::once(t.name.as_str()).chain(t.synonyms.iter().map(String::as_str)));
        Self::new(entries)
    }

    pub fn new<'a>(entries: impl IntoIterator<Item = &'a str>) -> Self {
        let mut patterns: Vec<String> = entries
            .into_iter()
            .map(|e| fold_case(e.trim()).0)
            .filter(|e| !e.is_empty())
            .collect();
        patterns.sort();
        patterns.dedup();
        let matcher = AhoCorasick::new(&patterns).expect("lexicon automaton");
        Gazetteer { patterns, matcher }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Matched char ranges of `text`, sorted by start.
    pub fn find(&self, text: &str) -> Vec<(usize, usize)> {
        let (folded, to_char) = fold_case(text);
        let chars: Vec<char> = folded.chars().collect();
        let is_word = |i: usize| chars.get(i).is_some_and(|c| c.is_alphanumeric());
        let mut hits: Vec<(usize, usize)> = self
            .matcher
            .find_overlapping_iter(&folded)
            .map(|m| (to_char[m.start()], to_char[m.end()]))
            .filter(|&(s, e)| (s == 0 || !is_word(s - 1)) && !is_word(e))
            .collect();
        hits.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        hits.dedup();
        let mut taken: Vec<(usize, usize)> = Vec::new();
        for (s, e) in hits {
            if taken.iter().all(|&(ts, te)| e <= ts || s >= te) {
                taken.push((s, e));
            }
        }
        taken.sort_unstable();
        taken
    }

    pub fn extract(&self, chunk: &NoteChunk) -> Vec<Mention> {
        self.find(&chunk.text)
            .into_iter()
            .map(|(start, end)| Mention {
                surface: char_slice(&chunk.text, start, end).to_string(),
                chunk_id: chunk.chunk_id.clone(),
                start,
                end,
                extractor: ExtractorKind::Gazetteer,
            })
            .collect()
    }
}

impl Extractor for Gazetteer {
    fn extract_chunk(&self, chunk: &NoteChunk) -> Result<ChunkOutput> {
        Ok(ChunkOutput {
            mentions: self.extract(chunk),
            ..ChunkOutput::default()
        })
    }
}
