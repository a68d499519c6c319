//! Rule-based sentence splitting and word-level tokenization.

use std::ops::Range;

const SENTENCE_FINAL: [char; 3] = ['.', '!', '?'];

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn trimmed(text: &str, range: Range<usize>) -> Option<Range<usize>> {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let body = slice.trim();
    if body.is_empty() {
        None
    } else {
        let start = range.start + lead;
        Some(start..start + body.len())
    }
}

/// Splits `text` into sentence byte ranges.
///
/// A sentence ends at a newline, or at `.`, `!` or `?` followed by
/// whitespace and an uppercase letter. Ranges are trimmed and never empty.
pub fn split_sentences(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '\n' {
            out.extend(trimmed(text, start..i));
            start = i + 1;
        } else if SENTENCE_FINAL.contains(&c) {
            let end = i + c.len_utf8();
            let rest = &text[end..];
            let after_ws = rest.trim_start_matches(|w: char| w.is_whitespace() && w != '\n');
            let had_ws = after_ws.len() < rest.len();
            if had_ws && after_ws.chars().next().is_some_and(char::is_uppercase) {
                out.extend(trimmed(text, start..end));
                start = end;
            }
        }
    }
    out.extend(trimmed(text, start..text.len()));
    out
}

/// Tokenizes `text[range]` and returns lowercased surfaces with absolute
/// byte ranges into `text`.
pub fn tokenize_range(text: &str, range: Range<usize>) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    let base = range.start;
    let flush = |out: &mut Vec<(String, Range<usize>)>, s: usize, e: usize| {
        out.push((text[s..e].to_lowercase(), s..e));
    };
    for (off, c) in text[range.clone()].char_indices() {
        let i = base + off;
        if c.is_whitespace() || is_punct(c) {
            if let Some(s) = word_start.take() {
                flush(&mut out, s, i);
            }
            if is_punct(c) {
                flush(&mut out, i, i + c.len_utf8());
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        flush(&mut out, s, range.end);
    }
    out
}

/// Lowercased word tokens with every punctuation character standing alone.
pub fn tokenize(sentence_text: &str) -> Vec<String> {
    tokenize_range(sentence_text, 0..sentence_text.len())
        .into_iter()
        .map(|(s, _)| s)
        .collect()
}

/// True if `token` consists only of punctuation characters.
pub fn is_punctuation_only(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_punct)
}
