use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use super::{AnnotatedCorpus, Document};
use crate::error::{Error, Result};

/// Word-level vocabulary with reserved entries first.
///
/// Layout: `[PAD]`, `[UNK]`, `[MASK]`, `[CLS]` (sentence start), one
/// `[DOM:<tag>]` indicator per domain, then surfaces by descending corpus
/// frequency with ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    n_reserved: usize,
    domains: Vec<String>,
}

impl Vocab {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    pub const MASK: u32 = 2;
    pub const CLS: u32 = 3;
    const FIXED: [&'static str; 4] = ["[PAD]", "[UNK]", "[MASK]", "[CLS]"];

    fn domain_token(tag: &str) -> String {
        format!("[DOM:{tag}]")
    }

    /// Builds a vocabulary from already-ranked surfaces.
    pub fn from_parts(domains: Vec<String>, surfaces: Vec<String>) -> Self {
        let mut tokens: Vec<String> = Self::FIXED.iter().map(|s| s.to_string()).collect();
        tokens.extend(domains.iter().map(|d| Self::domain_token(d)));
        let n_reserved = tokens.len();
        tokens.extend(surfaces);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            tokens,
            index,
            n_reserved,
            domains,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_reserved(&self) -> usize {
        self.n_reserved
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn id(&self, surface: &str) -> u32 {
        self.index.get(surface).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn domain_id(&self, tag: &str) -> Option<u32> {
        self.index.get(&Self::domain_token(tag)).copied()
    }

    pub fn is_reserved(&self, id: u32) -> bool {
        (id as usize) < self.n_reserved
    }

    /// Assigns vocabulary ids to every token of the corpus.
    pub fn index(&self, corpus: &mut AnnotatedCorpus) {
        for doc in &mut corpus.documents {
            self.index_document(doc);
        }
    }

    pub fn index_document(&self, doc: &mut Document) {
        for sentence in &mut doc.sentences {
            for tok in &mut sentence.tokens {
                tok.vocab_id = self.id(&tok.surface);
            }
        }
    }

    /// One entry per line, in id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let lines: Vec<String> = f.lines().collect::<std::io::Result<_>>()?;
        for (i, fixed) in Self::FIXED.iter().enumerate() {
            if lines.get(i).map(String::as_str) != Some(*fixed) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected reserved token {fixed}"),
                });
            }
        }
        let mut domains = Vec::new();
        let mut rest = Vec::new();
        for line in &lines[Self::FIXED.len()..] {
            match line.strip_prefix("[DOM:").and_then(|s| s.strip_suffix(']')) {
                Some(tag) if rest.is_empty() => domains.push(tag.to_string()),
                _ => rest.push(line.clone()),
            }
        }
        Ok(Vocab::from_parts(domains, rest))
    }
}

/// Builds a vocabulary of at most `max_size` entries from the documents'
/// token surfaces. Domain indicators are created for every domain tag seen.
pub fn build_vocab<'a, I>(documents: I, max_size: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut domains = BTreeSet::new();
    for doc in documents {
        domains.insert(doc.domain.clone());
        for s in &doc.sentences {
            for t in &s.tokens {
                *counts.entry(t.surface.as_str()).or_insert(0) += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus("no tokens to build a vocabulary from".into()));
    }
    let n_reserved = Vocab::FIXED.len() + domains.len();
    if max_size <= n_reserved {
        return Err(Error::Config(format!(
            "vocabulary size {max_size} leaves no room after {n_reserved} reserved entries"
        )));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let surfaces = ranked
        .into_iter()
        .take(max_size - n_reserved)
        .map(|(s, _)| s.to_string())
        .collect();
    Ok(Vocab::from_parts(domains.into_iter().collect(), surfaces))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::from_text("d", "src", text)
    }

    #[test]
    fn keeps_most_frequent_with_lexicographic_ties() {
        let d = doc("b a c b a b a");
        // reserved = 4 fixed + 1 domain
        let v = build_vocab([&d], 5 + 2).unwrap();
        assert_eq!(v.len(), 7);
        assert!(v.contains("a") && v.contains("b") && !v.contains("c"));
        assert_eq!(v.id("a"), 5);
        assert_eq!(v.id("b"), 6);
        assert_eq!(v.id("c"), Vocab::UNK);
        assert_eq!(v.domain_id("src"), Some(4));
    }

    #[test]
    fn stable_across_runs() {
        let d = doc("denies fever . reports cough and fever .");
        let a = build_vocab([&d], 100).unwrap();
        let b = build_vocab([&d], 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_and_undersized() {
        let empty = doc("");
        assert!(matches!(build_vocab([&empty], 10), Err(Error::EmptyCorpus(_))));
        let d = doc("a b");
        assert!(matches!(build_vocab([&d], 5), Err(Error::Config(_))));
    }

    #[test]
    fn unk_rate_equals_tail_mass() {
        // word k occurs (20 - k) times for k in 0..20
        let mut text = String::new();
        for k in 0..20 {
            for _ in 0..(20 - k) {
                text.push_str(&format!("w{k:02} "));
            }
        }
        let mut corpus = AnnotatedCorpus::new(vec![doc(&text)]);
        let keep = 8;
        let v = build_vocab(&corpus.documents, 5 + keep).unwrap();
        v.index(&mut corpus);
        let total: usize = (1..=20).sum();
        let kept: usize = (0..keep).map(|k| 20 - k).sum();
        let expected = (total - kept) as f64 / total as f64;
        let unk = corpus
            .sentences()
            .flat_map(|(_, s)| s.tokens.iter())
            .filter(|t| t.vocab_id == Vocab::UNK)
            .count() as f64
            / corpus.n_tokens() as f64;
        assert_eq!(unk, expected);
    }

    #[test]
    fn save_load_round_trip() {
        let d = doc("denies fever . reports cough");
        let v = build_vocab([&d], 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocab::load(&p).unwrap(), v);
    }
}
