//! Frequent-trigger phrase lists, dynamic trigger masking, and MLM masking.
//!
//! Dynamic masking replaces every occurrence of a listed source-domain
//! trigger word with `[MASK]` at a fixed rate, whether or not that
//! occurrence is annotated as a trigger, and redraws the masks every epoch.
//! Gold labels are never touched, so the model has to recognise masked
//! triggers from their context alone.
//!
//! Each mask decision is an independent Bernoulli draw keyed by
//! `(seed, epoch, document, sentence, token)`, which makes a plan
//! reproducible and independent of iteration order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::{is_punctuation_only, AnnotatedCorpus, SentenceId, Vocab};
use crate::error::{Error, Result};
use crate::rng::{keyed_uniform, stream};
use crate::schema::EntityType;

/// Default list length.
pub const DEFAULT_TOP_K: usize = 200;
/// Default dynamic masking rate.
pub const DEFAULT_MASK_RATE: f64 = 0.8;
/// Default MLM masking rate.
pub const DEFAULT_MLM_RATE: f64 = 0.15;

/// Surface text written in place of a masked token.
pub const MASK_SURFACE: &str = "[MASK]";

/// Frequent single-token trigger phrases of a source domain, most frequent
/// first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseList {
    pub phrases: Vec<(String, usize)>,
    pub source_domain: String,
    rank: HashMap<String, usize>,
}

impl PhraseList {
    pub fn new(phrases: Vec<(String, usize)>, source_domain: impl Into<String>) -> Self {
        let rank = phrases
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (p.clone(), i))
            .collect();
        PhraseList {
            phrases,
            source_domain: source_domain.into(),
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.rank.contains_key(surface)
    }

    /// Zero-based frequency rank.
    pub fn rank(&self, surface: &str) -> Option<usize> {
        self.rank.get(surface).copied()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(|(p, _)| p.as_str())
    }

    /// Two-column TSV: surface, frequency. The first line is a
    /// `# source_domain=<tag>` comment.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# source_domain={}", self.source_domain)?;
        for (p, n) in &self.phrases {
            writeln!(w, "{p}\t{n}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        self.write_tsv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut phrases = Vec::new();
        let mut domain = String::new();
        for (i, line) in f.lines().enumerate() {
            let line = line?;
            if let Some(c) = line.strip_prefix('#') {
                if let Some(d) = c.trim().strip_prefix("source_domain=") {
                    domain = d.to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once('\t')
                .and_then(|(p, n)| n.trim().parse::<usize>().ok().map(|n| (p.to_string(), n)));
            match parsed {
                Some(entry) => phrases.push(entry),
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: "expected '<surface>\\t<count>'".into(),
                    })
                }
            }
        }
        Ok(PhraseList::new(phrases, domain))
    }
}

/// Counts of lowercased gold trigger surfaces (multi-token triggers joined by
/// single spaces).
pub fn trigger_counts(corpus: &AnnotatedCorpus) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for (_, s) in corpus.sentences() {
        for e in s.gold_entities().iter().filter(|e| e.kind == EntityType::Trigger) {
            *counts.entry(s.span_text(e.span)).or_insert(0) += 1;
        }
    }
    counts
}

fn keep_phrase(p: &str) -> bool {
    !p.contains(' ') && !is_punctuation_only(p) && p.chars().count() >= 2
}

fn ranked(counts: &HashMap<String, usize>) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.iter().map(|(k, &n)| (k.clone(), n)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Takes the `top_k` most frequent trigger surfaces from already computed
/// counts, then drops multi-token, punctuation-only and single-character
/// entries.
pub fn phrase_list_from_counts(
    counts: &HashMap<String, usize>,
    top_k: usize,
    source_domain: impl Into<String>,
) -> PhraseList {
    let phrases = ranked(counts)
        .into_iter()
        .take(top_k)
        .filter(|(p, _)| keep_phrase(p))
        .collect();
    PhraseList::new(phrases, source_domain)
}

fn domain_label(corpus: &AnnotatedCorpus) -> String {
    let tags: BTreeSet<&str> = corpus.documents.iter().map(|d| d.domain.as_str()).collect();
    tags.into_iter().collect::<Vec<_>>().join("+")
}

/// How a list is built for a source made of several domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourcePooling {
    /// Count triggers over all documents together.
    #[default]
    Pooled,
    /// Build one list per domain tag and take the union, ranked by pooled
    /// counts. The result may exceed `top_k` entries.
    PerDomainUnion,
}

/// Frequent trigger list of the source training corpus.
pub fn build_frequency_list(corpus: &AnnotatedCorpus, top_k: usize) -> Result<PhraseList> {
    build_frequency_list_with(corpus, top_k, SourcePooling::Pooled)
}

pub fn build_frequency_list_with(
    corpus: &AnnotatedCorpus,
    top_k: usize,
    pooling: SourcePooling,
) -> Result<PhraseList> {
    let counts = trigger_counts(corpus);
    if counts.is_empty() {
        return Err(Error::EmptyCorpus("corpus has no gold triggers".into()));
    }
    let label = domain_label(corpus);
    match pooling {
        SourcePooling::Pooled => Ok(phrase_list_from_counts(&counts, top_k, label)),
        SourcePooling::PerDomainUnion => {
            let tags: BTreeSet<&str> = corpus.documents.iter().map(|d| d.domain.as_str()).collect();
            let mut keep = BTreeSet::new();
            for tag in tags {
                let sub = AnnotatedCorpus::new(
                    corpus
                        .documents
                        .iter()
                        .filter(|d| d.domain == tag)
                        .cloned()
                        .collect(),
                );
                let list = phrase_list_from_counts(&trigger_counts(&sub), top_k, tag);
                keep.extend(list.phrases.into_iter().map(|(p, _)| p));
            }
            let phrases = ranked(&counts)
                .into_iter()
                .filter(|(p, _)| keep.contains(p))
                .collect();
            Ok(PhraseList::new(phrases, label))
        }
    }
}

/// Positions masked in one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPlan {
    pub epoch: u64,
    pub seed: u64,
    pub positions: BTreeSet<(SentenceId, usize)>,
}

impl MaskPlan {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// The draw for one token occurrence.
pub fn mask_draw(base_seed: u64, epoch: u64, id: SentenceId, token: usize) -> f64 {
    keyed_uniform(&[
        stream::DYNAMIC_MASK,
        base_seed,
        epoch,
        id.document as u64,
        id.sentence as u64,
        token as u64,
    ])
}

/// Masks listed trigger words for one epoch.
///
/// Returns a copy of the corpus in which each matched token was replaced by
/// `[MASK]` (surface and vocabulary id) with probability `rate`, plus the
/// plan listing the replaced positions. Gold annotations are copied
/// unchanged.
pub fn apply_dynamic_mask(
    corpus: &AnnotatedCorpus,
    phrases: &PhraseList,
    rate: f64,
    epoch: u64,
    base_seed: u64,
) -> Result<(AnnotatedCorpus, MaskPlan)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!("mask rate {rate} outside [0, 1]")));
    }
    let mut masked = corpus.clone();
    let mut positions = BTreeSet::new();
    for (d, doc) in masked.documents.iter_mut().enumerate() {
        for (s, sentence) in doc.sentences.iter_mut().enumerate() {
            let id = SentenceId {
                document: d,
                sentence: s,
            };
            for (t, tok) in sentence.tokens.iter_mut().enumerate() {
                if phrases.contains(&tok.surface) && mask_draw(base_seed, epoch, id, t) < rate {
                    tok.surface = MASK_SURFACE.to_string();
                    tok.vocab_id = Vocab::MASK;
                    positions.insert((id, t));
                }
            }
        }
    }
    Ok((
        masked,
        MaskPlan {
            epoch,
            seed: base_seed,
            positions,
        },
    ))
}

/// Result of MLM masking one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlmMasked {
    pub ids: Vec<u32>,
    /// Masked positions in increasing order.
    pub positions: Vec<usize>,
    /// Original ids at `positions`.
    pub originals: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmMaskConfig {
    pub rate: f64,
    /// Use the 80/10/10 mask/random/keep replacement instead of always
    /// substituting `[MASK]`.
    pub mixed_replacement: bool,
}

impl Default for MlmMaskConfig {
    fn default() -> Self {
        MlmMaskConfig {
            rate: DEFAULT_MLM_RATE,
            mixed_replacement: false,
        }
    }
}

/// Whether MLM masking may select a token id. Padding, sentence start,
/// `[MASK]` itself and domain indicators are never selected.
pub fn is_maskable(vocab: &Vocab, id: u32) -> bool {
    id == Vocab::UNK || !vocab.is_reserved(id)
}

/// Selects each maskable position independently with probability
/// `config.rate`, keyed by `seed`.
pub fn mlm_mask(ids: &[u32], config: MlmMaskConfig, seed: u64, vocab: &Vocab) -> MlmMasked {
    let mut out = MlmMasked {
        ids: ids.to_vec(),
        positions: Vec::new(),
        originals: Vec::new(),
    };
    let n_plain = vocab.len().saturating_sub(vocab.n_reserved()) as u64;
    for (i, &id) in ids.iter().enumerate() {
        if !is_maskable(vocab, id) {
            continue;
        }
        if keyed_uniform(&[stream::MLM_MASK, seed, i as u64, 0]) >= config.rate {
            continue;
        }
        out.positions.push(i);
        out.originals.push(id);
        out.ids[i] = if config.mixed_replacement {
            let u = keyed_uniform(&[stream::MLM_MASK, seed, i as u64, 1]);
            if u < 0.8 || n_plain == 0 {
                Vocab::MASK
            } else if u < 0.9 {
                let r = keyed_uniform(&[stream::MLM_MASK, seed, i as u64, 2]);
                vocab.n_reserved() as u32 + ((r * n_plain as f64) as u64).min(n_plain - 1) as u32
            } else {
                id
            }
        } else {
            Vocab::MASK
        };
    }
    out
}

/// Per-surface counts of matched and masked occurrences in a plan.
pub fn mask_summary(
    corpus: &AnnotatedCorpus,
    plan: &MaskPlan,
) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (id, t) in &plan.positions {
        let surface = &corpus.sentence(*id).tokens[*t].surface;
        *out.entry(surface.clone()).or_insert(0) += 1;
    }
    out
}
