//! Documents, sentences, tokens, and the annotation file formats.

mod io;
mod spans;
mod text;
mod vocab;

use std::ops::Range;

pub use io::{load_corpus, load_unlabeled, parse_corpus, save_corpus, save_unlabeled, write_corpus};
pub use spans::{enumerate_spans, enumerate_spans_n, span_count};
pub use text::{is_punctuation_only, split_sentences, tokenize, tokenize_range};
pub use vocab::{build_vocab, Vocab};

use crate::schema::{self, Entity, Relation, Severity, Span, Violation};

/// Default maximum span width in tokens.
pub const DEFAULT_MAX_SPAN_WIDTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased surface form.
    pub surface: String,
    /// Id under the vocabulary used to index the corpus; [`Vocab::UNK`]
    /// until [`Vocab::index`] runs.
    pub vocab_id: u32,
    /// Byte range in the document text.
    pub char_range: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gold {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub gold: Option<Gold>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn token_ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.vocab_id).collect()
    }

    /// Lowercased surface of a span: its tokens joined by single spaces.
    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..span.end]
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn char_range(&self) -> Option<Range<usize>> {
        let first = self.tokens.first()?;
        let last = self.tokens.last()?;
        Some(first.char_range.start..last.char_range.end)
    }

    pub fn gold_entities(&self) -> &[Entity] {
        self.gold.as_ref().map_or(&[], |g| &g.entities)
    }

    pub fn gold_relations(&self) -> &[Relation] {
        self.gold.as_ref().map_or(&[], |g| &g.relations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Domain membership, e.g. `source-far` or `target`.
    pub domain: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    /// Splits and tokenizes raw text into an unannotated document.
    pub fn from_text(id: impl Into<String>, domain: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let sentences = split_sentences(&text)
            .into_iter()
            .map(|range| Sentence {
                tokens: tokenize_range(&text, range)
                    .into_iter()
                    .map(|(surface, char_range)| Token {
                        surface,
                        vocab_id: Vocab::UNK,
                        char_range,
                    })
                    .collect(),
                gold: None,
            })
            .filter(|s| !s.is_empty())
            .collect();
        Document {
            id: id.into(),
            text,
            domain: domain.into(),
            sentences,
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Checks token ranges and every sentence annotation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut prev_end = 0;
        for (si, sentence) in self.sentences.iter().enumerate() {
            for (ti, tok) in sentence.tokens.iter().enumerate() {
                let r = &tok.char_range;
                if r.start < prev_end || r.end <= r.start || r.end > self.text.len() {
                    out.push(Violation {
                        severity: Severity::Error,
                        document: self.id.clone(),
                        sentence: si,
                        item: format!("token {ti}"),
                        rule: format!(
                            "token range {}..{} is empty, out of order, or outside the text",
                            r.start, r.end
                        ),
                    });
                }
                prev_end = prev_end.max(r.end);
            }
            if let Some(gold) = &sentence.gold {
                out.extend(schema::validate_sentence(
                    &self.id,
                    si,
                    sentence.len(),
                    &gold.entities,
                    &gold.relations,
                ));
            }
        }
        out
    }
}

/// Position of a sentence inside an [`AnnotatedCorpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SentenceId {
    pub document: usize,
    pub sentence: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotatedCorpus {
    pub documents: Vec<Document>,
}

impl AnnotatedCorpus {
    pub fn new(documents: Vec<Document>) -> Self {
        AnnotatedCorpus { documents }
    }

    pub fn sentences(&self) -> impl Iterator<Item = (SentenceId, &Sentence)> {
        self.documents.iter().enumerate().flat_map(|(d, doc)| {
            doc.sentences.iter().enumerate().map(move |(s, sent)| {
                (
                    SentenceId {
                        document: d,
                        sentence: s,
                    },
                    sent,
                )
            })
        })
    }

    pub fn sentence(&self, id: SentenceId) -> &Sentence {
        &self.documents[id.document].sentences[id.sentence]
    }

    pub fn n_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn n_tokens(&self) -> usize {
        self.documents.iter().map(Document::n_tokens).sum()
    }

    /// Every invariant violation and warning in the corpus.
    pub fn validate(&self) -> Vec<Violation> {
        self.documents.iter().flat_map(Document::validate).collect()
    }

    /// Only the violations that break an invariant.
    pub fn errors(&self) -> Vec<Violation> {
        self.validate()
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .collect()
    }

    /// Same documents and token layout, with the gold annotation of each
    /// sentence replaced by `f(id, sentence)`.
    pub fn with_annotations<F>(&self, mut f: F) -> AnnotatedCorpus
    where
        F: FnMut(SentenceId, &Sentence) -> Gold,
    {
        let mut out = self.clone();
        for (d, doc) in out.documents.iter_mut().enumerate() {
            for (s, sent) in doc.sentences.iter_mut().enumerate() {
                let id = SentenceId {
                    document: d,
                    sentence: s,
                };
                let gold = f(id, &self.documents[d].sentences[s]);
                sent.gold = Some(gold);
            }
        }
        out
    }

    /// Checks that two corpora share documents, sentences and token counts.
    pub fn check_aligned(&self, other: &AnnotatedCorpus) -> crate::Result<()> {
        use crate::Error;
        if self.documents.len() != other.documents.len() {
            return Err(Error::Mismatch(format!(
                "{} vs {} documents",
                self.documents.len(),
                other.documents.len()
            )));
        }
        for (a, b) in self.documents.iter().zip(&other.documents) {
            if a.id != b.id || a.sentences.len() != b.sentences.len() {
                return Err(Error::Mismatch(format!(
                    "document {} ({} sentences) vs {} ({} sentences)",
                    a.id,
                    a.sentences.len(),
                    b.id,
                    b.sentences.len()
                )));
            }
            for (i, (sa, sb)) in a.sentences.iter().zip(&b.sentences).enumerate() {
                if sa.len() != sb.len() {
                    return Err(Error::Mismatch(format!(
                        "document {} sentence {i}: {} vs {} tokens",
                        a.id,
                        sa.len(),
                        sb.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_from_text_splits_and_tokenizes() {
        let doc = Document::from_text("d1", "target", "No cough. Denies fever.");
        assert_eq!(doc.sentences.len(), 2);
        let s: Vec<_> = doc.sentences[1].surfaces().collect();
        assert_eq!(s, vec!["denies", "fever", "."]);
        assert!(doc.validate().is_empty());
        assert_eq!(doc.sentences[1].char_range(), Some(10..23));
    }

    #[test]
    fn sentence_ids_enumerate_in_order() {
        let corpus = AnnotatedCorpus::new(vec![
            Document::from_text("a", "x", "One. Two."),
            Document::from_text("b", "x", "Three."),
        ]);
        let ids: Vec<_> = corpus.sentences().map(|(id, _)| (id.document, id.sentence)).collect();
        assert_eq!(ids, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(corpus.n_sentences(), 3);
    }
}
