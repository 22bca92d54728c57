//! Character-offset helpers. All offsets exposed by this crate count
//! Unicode scalar values, not bytes.

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of the `char_idx`-th character (or `s.len()` at the end).
pub fn byte_index(s: &str, char_idx: usize) -> usize {
    s.char_indices()
        .nth(char_idx)
        .map_or(s.len(), |(b, _)| b)
}

/// Substring by character range.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let b0 = byte_index(s, start);
    let b1 = b0 + byte_index(&s[b0..], end - start);
    &s[b0..b1]
}

/// Char offset of every byte boundary; `map[b]` is valid where `b` is a
/// char boundary, plus `map[s.len()]`.
pub fn byte_to_char_map(s: &str) -> Vec<usize> {
    let mut map = vec![0; s.len() + 1];
    let mut ci = 0;
    for (b, c) in s.char_indices() {
        for k in 0..c.len_utf8() {
            map[b + k] = ci;
        }
        ci += 1;
    }
    map[s.len()] = ci;
    map
}
