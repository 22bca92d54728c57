//! The `<span>` markup protocol: tagging, stripping and parsing model output
//! back onto the original chunk text.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ExtractorKind, Mention};
use crate::error::{Error, Result};
use crate::text::{byte_to_char_map, char_len, char_slice};

static TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<span\b[^>]*>|</span\s*>").expect("static pattern"));

/// Escapes `&`, `<` and `>` so that text cannot be mistaken for markup.
pub fn escape_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_markup`]; unknown entities are kept literally.
pub fn unescape_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let hit = [("&amp;", '&'), ("&lt;", '<'), ("&gt;", '>')]
            .into_iter()
            .find(|(e, _)| rest.starts_with(e));
        match hit {
            Some((e, c)) => {
                out.push(c);
                rest = &rest[e.len()..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Wraps each `(start, end)` char range of `text` in span tags, escaping
/// the text in between. Ranges must be non-empty, in bounds and disjoint.
pub fn annotate(text: &str, ranges: &[(usize, usize)]) -> Result<String> {
    let mut sorted = ranges.to_vec();
    sorted.sort_unstable();
    let n = char_len(text);
    let mut out = String::new();
    let mut cursor = 0;
    for &(s, e) in &sorted {
        if s >= e || e > n || s < cursor {
            return Err(Error::Generation(format!("invalid or overlapping range {s}..{e}")));
        }
        out.push_str(&escape_markup(char_slice(text, cursor, s)));
        out.push_str("<span>");
        out.push_str(&escape_markup(char_slice(text, s, e)));
        out.push_str("</span>");
        cursor = e;
    }
    out.push_str(&escape_markup(char_slice(text, cursor, n)));
    Ok(out)
}

/// Removes all span tags and unescapes the remaining text.
pub fn strip_markup(annotated: &str) -> String {
    unescape_markup(&TAG.replace_all(annotated, ""))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Unclosed,
    Nested,
    StrayClose,
    Empty,
    NotFound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkupIssue {
    pub kind: IssueKind,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ParsedMarkup {
    pub mentions: Vec<Mention>,
    /// Model output did not reproduce the original text; offsets were
    /// recovered by searching the original.
    pub recovered: bool,
    pub issues: Vec<MarkupIssue>,
}

struct RawSpan {
    text: String,
    // char offset into the stripped text
    start: usize,
}

/// Splits annotated output into stripped text and span contents. Text
/// segments are unescaped when `unescape` is set.
fn scan(annotated: &str, unescape: bool, issues: &mut Vec<MarkupIssue>) -> (String, Vec<RawSpan>) {
    let mut stripped = String::new();
    let mut stripped_len = 0usize;
    let mut spans = Vec::new();
    let mut open: Option<RawSpan> = None;
    let mut last = 0;
    let mut push_text = |seg: &str, stripped: &mut String, open: &mut Option<RawSpan>| {
        let seg = if unescape { unescape_markup(seg) } else { seg.to_string() };
        stripped_len += char_len(&seg);
        stripped.push_str(&seg);
        if let Some(o) = open.as_mut() {
            o.text.push_str(&seg);
        }
        stripped_len
    };
    for m in TAG.find_iter(annotated) {
        let end_len = push_text(&annotated[last..m.start()], &mut stripped, &mut open);
        last = m.end();
        if m.as_str().starts_with("</") {
            match open.take() {
                Some(span) => spans.push(span),
                None => issues.push(MarkupIssue {
                    kind: IssueKind::StrayClose,
                    text: String::new(),
                }),
            }
        } else {
            if let Some(prev) = open.take() {
                issues.push(MarkupIssue {
                    kind: IssueKind::Nested,
                    text: prev.text,
                });
            }
            open = Some(RawSpan {
                text: String::new(),
                start: end_len,
            });
        }
    }
    push_text(&annotated[last..], &mut stripped, &mut open);
    if let Some(span) = open {
        issues.push(MarkupIssue {
            kind: IssueKind::Unclosed,
            text: span.text,
        });
    }
    (stripped, spans)
}

/// Trims surrounding whitespace of a span, returning its content and the
/// number of leading characters removed.
fn trim_span(text: &str) -> (&str, usize) {
    let trimmed = text.trim();
    let lead = char_len(&text[..text.len() - text.trim_start().len()]);
    (trimmed, lead)
}

/// Parses model output against the exact `original` text sent. Offsets in
/// the returned mentions always index `original`.
pub fn parse_span_markup(original: &str, annotated: &str, chunk_id: &str, extractor: ExtractorKind) -> ParsedMarkup {
    let mut issues = Vec::new();
    let mention = |surface: &str, start: usize| Mention {
        surface: surface.to_string(),
        chunk_id: chunk_id.to_string(),
        start,
        end: start + char_len(surface),
        extractor,
    };

    for unescape in [false, true] {
        let mut attempt_issues = Vec::new();
        let (stripped, spans) = scan(annotated, unescape, &mut attempt_issues);
        if stripped != original {
            continue;
        }
        issues.extend(attempt_issues);
        let mut mentions = Vec::new();
        for span in spans {
            let (surface, lead) = trim_span(&span.text);
            if surface.is_empty() {
                issues.push(MarkupIssue {
                    kind: IssueKind::Empty,
                    text: span.text,
                });
                continue;
            }
            mentions.push(mention(surface, span.start + lead));
        }
        return ParsedMarkup {
            mentions,
            recovered: false,
            issues,
        };
    }

    let (_, spans) = scan(annotated, true, &mut issues);
    let mut finder = OccurrenceFinder::new(original);
    let mut mentions = Vec::new();
    for span in spans {
        let (surface, _) = trim_span(&span.text);
        if surface.is_empty() {
            issues.push(MarkupIssue {
                kind: IssueKind::Empty,
                text: span.text,
            });
            continue;
        }
        match finder.locate(surface) {
            Some((start, end)) => mentions.push(Mention {
                surface: char_slice(original, start, end).to_string(),
                chunk_id: chunk_id.to_string(),
                start,
                end,
                extractor,
            }),
            None => {
                log::warn!("span {surface:?} not found in chunk {chunk_id}; dropped");
                issues.push(MarkupIssue {
                    kind: IssueKind::NotFound,
                    text: surface.to_string(),
                });
            }
        }
    }
    ParsedMarkup {
        mentions,
        recovered: true,
        issues,
    }
}

/// Left-to-right search for span strings in the original text. Each located
/// range is marked used; later spans prefer occurrences after the previous
/// one, then any unused occurrence, first exactly and then ignoring case.
struct OccurrenceFinder<'a> {
    original: &'a str,
    lower: Option<(String, Vec<usize>)>,
    to_char: Vec<usize>,
    used: Vec<(usize, usize)>,
    cursor: usize,
}

impl<'a> OccurrenceFinder<'a> {
    fn new(original: &'a str) -> Self {
        OccurrenceFinder {
            original,
            lower: None,
            to_char: byte_to_char_map(original),
            used: Vec::new(),
            cursor: 0,
        }
    }

    fn free(&self, s: usize, e: usize) -> bool {
        self.used.iter().all(|&(us, ue)| e <= us || s >= ue)
    }

    fn pick(&self, hits: &[(usize, usize)]) -> Option<(usize, usize)> {
        hits.iter()
            .copied()
            .find(|&(s, e)| s >= self.cursor && self.free(s, e))
            .or_else(|| hits.iter().copied().find(|&(s, e)| self.free(s, e)))
    }

    fn locate(&mut self, surface: &str) -> Option<(usize, usize)> {
        let exact: Vec<(usize, usize)> = self
            .original
            .match_indices(surface)
            .map(|(b, m)| (self.to_char[b], self.to_char[b + m.len()]))
            .collect();
        let found = self.pick(&exact).or_else(|| {
            let (lower, map) = self.lower.get_or_insert_with(|| fold_case(self.original));
            let needle = fold_case(surface).0;
            if needle.is_empty() {
                return None;
            }
            let hits: Vec<(usize, usize)> = lower
                .match_indices(needle.as_str())
                .map(|(b, m)| (map[b], map[b + m.len()]))
                .collect();
            self.pick(&hits)
        });
        if let Some((s, e)) = found {
            self.used.push((s, e));
            self.cursor = e;
        }
        found
    }
}

/// Lowercases one character at a time, keeping characters whose lowercase
/// form is not a single character. Returns the folded string and a map from
/// its byte offsets to char offsets (folding preserves char count).
pub(crate) fn fold_case(s: &str) -> (String, Vec<usize>) {
    let folded: String = s
        .chars()
        .map(|c| {
            let mut l = c.to_lowercase();
            match (l.next(), l.next()) {
                (Some(x), None) => x,
                _ => c,
            }
        })
        .collect();
    let map = byte_to_char_map(&folded);
    (folded, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(original: &str, annotated: &str) -> ParsedMarkup {
        parse_span_markup(original, annotated, "c", ExtractorKind::Remote)
    }

    #[test]
    fn exact_alignment() {
        let r = parse("pt has macrocephaly today", "pt has <span>macrocephaly</span> today");
        assert_eq!(r.mentions.len(), 1);
        assert_eq!((r.mentions[0].start, r.mentions[0].end), (7, 19));
        assert!(!r.recovered);
        assert!(parse("no tags here", "no tags here").mentions.is_empty());
    }

    #[test]
    fn recovery_after_paraphrase() {
        let original = "Mother notes seizures at night and seizures by day.";
        let r = parse(original, "Mom reports <span>seizures</span> at night and <span>seizures</span> daily.");
        assert!(r.recovered);
        let offs: Vec<(usize, usize)> = r.mentions.iter().map(|m| (m.start, m.end)).collect();
        assert_eq!(offs, vec![(13, 21), (35, 43)]);

        let r = parse("Has Seizures.", "has <span>seizures</span>");
        assert_eq!(r.mentions[0].surface, "Seizures");

        let r = parse("quiet", "<span>tremor</span> quiet");
        assert!(r.mentions.is_empty());
        assert_eq!(r.issues[0].kind, IssueKind::NotFound);
    }

    #[test]
    fn malformed_tags_keep_other_spans() {
        let original = "a b c d";
        let r = parse(original, "<span>a</span> <span>b <span>c</span> d");
        assert_eq!(r.mentions.iter().map(|m| m.surface.as_str()).collect::<Vec<_>>(), vec!["a", "c"]);
        assert!(r.issues.iter().any(|i| i.kind == IssueKind::Nested));
        let r = parse(original, "a b</span> c <span>d");
        assert!(r.mentions.is_empty());
        let kinds: Vec<IssueKind> = r.issues.iter().map(|i| i.kind).collect();
        assert_eq!(kinds, vec![IssueKind::StrayClose, IssueKind::Unclosed]);
    }

    #[test]
    fn escaped_output_aligns_exactly() {
        let original = "x < y & <span> literal";
        let tagged = annotate(original, &[(0, 1)]).unwrap();
        assert_eq!(strip_markup(&tagged), original);
        let r = parse(original, &tagged);
        assert!(!r.recovered);
        assert_eq!(r.mentions[0].surface, "x");
    }

    #[test]
    fn whitespace_inside_span_is_trimmed() {
        let r = parse("a  cough here", "a <span> cough </span>here");
        assert_eq!((r.mentions[0].start, r.mentions[0].end), (3, 8));
    }

    #[test]
    fn escaping_round_trip() {
        for s in ["", "&amp;", "<span>", "a&b<c>d", "&&lt;"] {
            assert_eq!(unescape_markup(&escape_markup(s)), s);
        }
        assert!(annotate("abc", &[(0, 2), (1, 3)]).is_err());
    }
}
