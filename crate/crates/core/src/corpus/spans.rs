use super::Sentence;
use crate::schema::Span;

/// All spans `[i, j)` of a sentence with `j - i <= max_width`, ordered by
/// start then end.
pub fn enumerate_spans(sentence: &Sentence, max_width: usize) -> Vec<Span> {
    enumerate_spans_n(sentence.len(), max_width)
}

pub fn enumerate_spans_n(n_tokens: usize, max_width: usize) -> Vec<Span> {
    let mut out = Vec::with_capacity(span_count(n_tokens, max_width));
    for start in 0..n_tokens {
        for end in start + 1..=(start + max_width).min(n_tokens) {
            out.push(Span::new(start, end));
        }
    }
    out
}

/// Closed form `sum_{w=1..W} max(0, n - w + 1)`.
pub fn span_count(n_tokens: usize, max_width: usize) -> usize {
    (1..=max_width).map(|w| (n_tokens + 1).saturating_sub(w)).sum()
}
