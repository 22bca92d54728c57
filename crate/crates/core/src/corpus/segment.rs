//! Rule-based sentence splitting and sentence-preserving chunking.

use super::{clean_note_text, ClinicalNote, NoteChunk};

pub const DEFAULT_MAX_CHARS: usize = 4026;

/// Tokens that end with a period without ending the sentence.
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "e.g", "i.e", "cf", "approx", "no",
    "fig",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}'];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits `text` into sentences that concatenate back to `text`. Each
/// sentence keeps its trailing whitespace. Returned offsets are character
/// offsets.
pub fn split_sentences(text: &str) -> Vec<(String, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let push = |from: usize, to: usize, out: &mut Vec<(String, usize)>| {
        if to > from {
            out.push((chars[from..to].iter().collect(), from));
        }
    };

    while i < n {
        let c = chars[i];
        if c == '\n' {
            let mut j = i;
            while j < n && chars[j].is_whitespace() {
                j += 1;
            }
            push(start, j, &mut out);
            start = j;
            i = j;
            continue;
        }
        if is_terminal(c) {
            let mut j = i + 1;
            while j < n && (is_terminal(chars[j]) || CLOSERS.contains(&chars[j])) {
                j += 1;
            }
            if j == n || !chars[j].is_whitespace() {
                i = j;
                continue;
            }
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            let newline_in_gap = chars[j..k].contains(&'\n');
            if c == '.' && !newline_in_gap && k < n && is_abbreviation(&chars, i, chars[k]) {
                i = k;
                continue;
            }
            push(start, k, &mut out);
            start = k;
            i = k;
            continue;
        }
        i += 1;
    }
    push(start, n, &mut out);
    out
}

/// The period at `dot` follows an abbreviation, or the next sentence would
/// start in lowercase.
fn is_abbreviation(chars: &[char], dot: usize, next: char) -> bool {
    if next.is_lowercase() {
        return true;
    }
    let mut b = dot;
    while b > 0 && (chars[b - 1].is_alphabetic() || chars[b - 1] == '.') {
        b -= 1;
    }
    let token: String = chars[b..dot].iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.contains(&token.as_str())
}

/// Greedily packs whole sentences of the cleaned note into chunks of at
/// most `max_chars` characters. A sentence longer than the limit is cut at
/// the limit.
pub fn chunk_note(note: &ClinicalNote, max_chars: usize) -> Vec<NoteChunk> {
    assert!(max_chars >= 1, "max_chars must be positive");
    let text = clean_note_text(&note.text);
    let mut pieces: Vec<(usize, String)> = Vec::new();
    let mut cur = String::new();
    let mut cur_len = 0usize;
    let mut cur_start = 0usize;

    for (sentence, s_start) in split_sentences(&text) {
        let len = sentence.chars().count();
        if cur_len + len <= max_chars {
            if cur_len == 0 {
                cur_start = s_start;
            }
            cur.push_str(&sentence);
            cur_len += len;
            continue;
        }
        if cur_len > 0 {
            pieces.push((cur_start, std::mem::take(&mut cur)));
        }
        let chars: Vec<char> = sentence.chars().collect();
        let mut offset = 0;
        while chars.len() - offset > max_chars {
            pieces.push((s_start + offset, chars[offset..offset + max_chars].iter().collect()));
            offset += max_chars;
        }
        cur = chars[offset..].iter().collect();
        cur_len = chars.len() - offset;
        cur_start = s_start + offset;
    }
    if cur_len > 0 {
        pieces.push((cur_start, cur));
    }

    pieces
        .into_iter()
        .enumerate()
        .map(|(k, (start, text))| {
            let len = text.chars().count();
            NoteChunk {
                chunk_id: format!("{}#{:04}", note.note_id, k),
                note_id: note.note_id.clone(),
                patient_id: note.patient_id.clone(),
                text,
                start_offset: start,
                end_offset: start + len,
            }
        })
        .collect()
}
