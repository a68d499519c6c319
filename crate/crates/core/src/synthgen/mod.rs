//! Template-based generator of labeled clinical-style sentences with
//! controllable trigger distributions and negative contexts.
//!
//! Every symptom mention is realized from a cue template, so gold entities,
//! relations and events are exact by construction. Lexicon words appear
//! either as triggers or, with a per-word probability, inside a
//! non-symptom context such as `Referred to fever clinic`.

pub mod presets;
mod templates;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedCorpus, Document, Gold, Sentence, Token, Vocab};
use crate::error::{Error, Result};
use crate::rng::{keyed_rng, stream};
use crate::schema::{AssertionValue, ChangeValue, Entity, EntityType, Relation, SeverityValue, Span, Subtype};

pub use templates::template_words;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssertionWeights {
    pub present: f64,
    pub absent: f64,
    pub possible: f64,
    pub conditional: f64,
    pub hypothetical: f64,
    pub not_patient: f64,
    /// Triggers realized without any assertion cue.
    pub unasserted: f64,
}

impl Default for AssertionWeights {
    fn default() -> Self {
        AssertionWeights {
            present: 0.45,
            absent: 0.3,
            possible: 0.07,
            conditional: 0.06,
            hypothetical: 0.07,
            not_patient: 0.05,
            unasserted: 0.0,
        }
    }
}

impl AssertionWeights {
    fn table(&self) -> [(Option<AssertionValue>, f64); 7] {
        use AssertionValue::*;
        [
            (Some(Present), self.present),
            (Some(Absent), self.absent),
            (Some(Possible), self.possible),
            (Some(Conditional), self.conditional),
            (Some(Hypothetical), self.hypothetical),
            (Some(NotPatient), self.not_patient),
            (None, self.unasserted),
        ]
    }
}

/// Chance that an event carries each argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArgumentProbs {
    pub anatomy: f64,
    pub characteristics: f64,
    pub duration: f64,
    pub frequency: f64,
    pub severity: f64,
    pub change: f64,
}

impl Default for ArgumentProbs {
    fn default() -> Self {
        ArgumentProbs {
            anatomy: 0.2,
            characteristics: 0.15,
            duration: 0.25,
            frequency: 0.15,
            severity: 0.25,
            change: 0.15,
        }
    }
}

/// Generator settings for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainSpec {
    pub name: String,
    pub seed: u64,
    /// Symptom words in Zipf rank order.
    pub lexicon: Vec<String>,
    pub zipf_exponent: f64,
    /// Default chance that a drawn lexicon word is placed in a
    /// non-symptom context.
    pub neg_context_prob: f64,
    pub neg_context_overrides: BTreeMap<String, f64>,
    pub assertion_weights: AssertionWeights,
    pub argument_probs: ArgumentProbs,
    pub second_mention_prob: f64,
    pub filler_prob: f64,
    pub sentences_per_document: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            name: "domain".into(),
            seed: 0,
            lexicon: Vec::new(),
            zipf_exponent: 1.0,
            neg_context_prob: 0.0,
            neg_context_overrides: BTreeMap::new(),
            assertion_weights: AssertionWeights::default(),
            argument_probs: ArgumentProbs::default(),
            second_mention_prob: 0.25,
            filler_prob: 0.1,
            sentences_per_document: 5,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {p} is not a probability")))
    }
}

impl DomainSpec {
    pub fn neg_prob(&self, word: &str) -> f64 {
        self.neg_context_overrides.get(word).copied().unwrap_or(self.neg_context_prob)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lexicon.is_empty() {
            return Err(Error::Config(format!("domain {}: lexicon is empty", self.name)));
        }
        if self.sentences_per_document == 0 {
            return Err(Error::Config("sentences_per_document must be positive".into()));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return Err(Error::Config(format!("zipf_exponent {} must be non-negative", self.zipf_exponent)));
        }
        let reserved: BTreeSet<String> = template_words().into_iter().collect();
        let mut seen = BTreeSet::new();
        for w in &self.lexicon {
            let toks = crate::corpus::tokenize(w);
            if toks.len() != 1 || toks[0] != *w {
                return Err(Error::Config(format!("lexicon entry {w:?} must be one lowercase token")));
            }
            if reserved.contains(w) {
                return Err(Error::Config(format!("lexicon entry {w:?} collides with a template word")));
            }
            if !seen.insert(w) {
                return Err(Error::Config(format!("lexicon entry {w:?} is duplicated")));
            }
        }
        for (w, p) in &self.neg_context_overrides {
            check_prob(&format!("neg_context_overrides.{w}"), *p)?;
        }
        let a = &self.argument_probs;
        for (n, p) in [
            ("neg_context_prob", self.neg_context_prob),
            ("second_mention_prob", self.second_mention_prob),
            ("filler_prob", self.filler_prob),
            ("argument_probs.anatomy", a.anatomy),
            ("argument_probs.characteristics", a.characteristics),
            ("argument_probs.duration", a.duration),
            ("argument_probs.frequency", a.frequency),
            ("argument_probs.severity", a.severity),
            ("argument_probs.change", a.change),
        ] {
            check_prob(n, p)?;
        }
        let w = self.assertion_weights.table();
        if w.iter().any(|(_, x)| !(*x >= 0.0 && x.is_finite())) || w.iter().map(|x| x.1).sum::<f64>() <= 0.0 {
            return Err(Error::Config("assertion weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: DomainSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Zipf probabilities of the lexicon ranks.
    pub fn zipf_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = (1..=self.lexicon.len())
            .map(|k| (k as f64).powf(-self.zipf_exponent))
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / z).collect()
    }
}

/// A labeled corpus and an unlabeled pool from the same distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub labeled: AnnotatedCorpus,
    pub unlabeled: Vec<Document>,
}

struct SentenceBuilder {
    tokens: Vec<String>,
    entities: Vec<Entity>,
    relations: Vec<Relation>,
}

impl SentenceBuilder {
    fn push_words(&mut self, s: &str) -> Span {
        let start = self.tokens.len();
        self.tokens.extend(s.split_whitespace().map(str::to_string));
        Span::new(start, self.tokens.len())
    }

    fn entity(&mut self, kind: EntityType, subtype: Option<Subtype>, span: Span) -> String {
        let id = format!("T{}", self.entities.len() + 1);
        self.entities.push(Entity::new(id.clone(), kind, subtype, span));
        id
    }

    fn link(&mut self, head: &str, tail: String) {
        self.relations.push(Relation {
            head: head.to_string(),
            tail,
        });
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.gen_range(0..xs.len())]
}

struct Generator<'a> {
    spec: &'a DomainSpec,
    words: WeightedIndex<f64>,
    assertions: WeightedIndex<f64>,
    table: [(Option<AssertionValue>, f64); 7],
}

impl<'a> Generator<'a> {
    fn new(spec: &'a DomainSpec) -> Result<Self> {
        spec.validate()?;
        let table = spec.assertion_weights.table();
        Ok(Generator {
            spec,
            words: WeightedIndex::new(spec.zipf_weights()).map_err(|e| Error::Config(e.to_string()))?,
            assertions: WeightedIndex::new(table.iter().map(|x| x.1)).map_err(|e| Error::Config(e.to_string()))?,
            table,
        })
    }

    /// Appends one symptom mention of `word` using the template `cue`.
    fn mention(&self, b: &mut SentenceBuilder, rng: &mut ChaCha8Rng, word: &str) {
        let a = &self.spec.argument_probs;
        let assertion = self.table[self.assertions.sample(rng)].0;
        let cue = *pick(rng, templates::cues(assertion));
        let (before, after) = cue.split_once("{}").expect("cue has a slot");
        b.push_words(before);

        let severity = rng
            .gen_bool(a.severity)
            .then(|| *pick(rng, &SeverityValue::ALL));
        let characteristic = rng.gen_bool(a.characteristics).then(|| *pick(rng, templates::CHARACTERISTICS));
        let anatomy = rng.gen_bool(a.anatomy).then(|| *pick(rng, templates::ANATOMY));
        let duration = rng.gen_bool(a.duration).then(|| *pick(rng, templates::DURATION));
        let frequency = rng.gen_bool(a.frequency).then(|| *pick(rng, templates::FREQUENCY));
        let change = rng.gen_bool(a.change).then(|| *pick(rng, &ChangeValue::ALL));

        let mut args: Vec<(EntityType, Option<Subtype>, Span)> = Vec::new();
        if let Some(s) = severity {
            let span = b.push_words(pick(rng, templates::severity_words(s)));
            args.push((EntityType::Severity, Some(Subtype::Severity(s)), span));
        }
        if let Some(words) = characteristic {
            let span = b.push_words(&words.join(" "));
            args.push((EntityType::Characteristics, None, span));
        }
        if let Some(words) = anatomy {
            let span = b.push_words(&words.join(" "));
            args.push((EntityType::Anatomy, None, span));
        }
        let trigger_span = b.push_words(word);
        if let Some((lead, span_words)) = duration {
            b.push_words(&lead.join(" "));
            let span = b.push_words(&span_words.join(" "));
            args.push((EntityType::Duration, None, span));
        }
        if let Some(words) = frequency {
            let span = b.push_words(&words.join(" "));
            args.push((EntityType::Frequency, None, span));
        }
        if let Some(c) = change {
            let (lead, span_words) = *pick(rng, templates::change_words(c));
            b.push_words(&lead.join(" "));
            let span = b.push_words(&span_words.join(" "));
            args.push((EntityType::Change, Some(Subtype::Change(c)), span));
        }
        b.push_words(after);

        let trigger = b.entity(EntityType::Trigger, None, trigger_span);
        if let Some(v) = assertion {
            let id = b.entity(EntityType::Assertion, Some(Subtype::Assertion(v)), trigger_span);
            b.link(&trigger, id);
        }
        for (kind, subtype, span) in args {
            let id = b.entity(kind, subtype, span);
            b.link(&trigger, id);
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> SentenceBuilder {
        let mut b = SentenceBuilder {
            tokens: Vec::new(),
            entities: Vec::new(),
            relations: Vec::new(),
        };
        if rng.gen_bool(self.spec.filler_prob) {
            b.push_words(pick(rng, templates::FILLER));
        } else {
            let n = if rng.gen_bool(self.spec.second_mention_prob) { 2 } else { 1 };
            for i in 0..n {
                if i > 0 {
                    b.push_words("and");
                }
                let word = &self.spec.lexicon[self.words.sample(rng)];
                if rng.gen_bool(self.spec.neg_prob(word)) {
                    let ctx = pick(rng, templates::NEGATIVE_CONTEXTS);
                    b.push_words(&ctx.replace("{}", word));
                } else {
                    self.mention(&mut b, rng, word);
                }
            }
        }
        b.push_words(".");
        b
    }

    fn document(&self, id: String, n_sentences: usize, rng: &mut ChaCha8Rng, labeled: bool) -> Document {
        let mut text = String::new();
        let mut sentences = Vec::with_capacity(n_sentences);
        for _ in 0..n_sentences {
            let b = self.sentence(rng);
            if !text.is_empty() {
                text.push(' ');
            }
            let mut tokens = Vec::with_capacity(b.tokens.len());
            for (i, w) in b.tokens.iter().enumerate() {
                if i > 0 && !matches!(w.as_str(), "." | ",") {
                    text.push(' ');
                }
                let surface = if i == 0 { capitalize(w) } else { w.clone() };
                let start = text.len();
                text.push_str(&surface);
                tokens.push(Token {
                    surface: w.to_lowercase(),
                    vocab_id: Vocab::UNK,
                    char_range: start..text.len(),
                });
            }
            let gold = labeled.then_some(Gold {
                entities: b.entities,
                relations: b.relations,
            });
            sentences.push(Sentence { tokens, gold });
        }
        Document {
            id,
            text,
            domain: self.spec.name.clone(),
            sentences,
        }
    }

    fn documents(&self, n_sentences: usize, labeled: bool, tag: u64) -> Vec<Document> {
        let per = self.spec.sentences_per_document;
        (0..n_sentences.div_ceil(per))
            .map(|d| {
                let mut rng = keyed_rng(&[stream::SYNTH, self.spec.seed, tag, d as u64]);
                let n = per.min(n_sentences - d * per);
                let prefix = if labeled { "" } else { "u" };
                self.document(format!("{}-{prefix}{d:05}", self.spec.name), n, &mut rng, labeled)
            })
            .collect()
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Generates `n_sentences` labeled sentences and `n_unlabeled` sentences of
/// unlabeled text.
pub fn generate_domain(spec: &DomainSpec, n_sentences: usize, n_unlabeled: usize) -> Result<Generated> {
    if n_sentences == 0 {
        return Err(Error::Config("n_sentences must be positive".into()));
    }
    let g = Generator::new(spec)?;
    Ok(Generated {
        labeled: AnnotatedCorpus::new(g.documents(n_sentences, true, 0)),
        unlabeled: g.documents(n_unlabeled, false, 1),
    })
}

/// Distribution-shift statistics between a source and a target corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    /// Jaccard similarity of the two lexicons.
    pub lexicon_overlap: f64,
    /// Fraction of target trigger instances whose surface is among the
    /// source's 100 most frequent trigger phrases.
    pub top100_coverage: f64,
    /// Mean of target minus source positive-class ratio over phrases that
    /// occur in both corpora.
    pub mean_ratio_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPair {
    pub source: Generated,
    pub target: Generated,
    pub summary: ShiftSummary,
}

fn occurrence_counts(corpus: &AnnotatedCorpus) -> (HashMap<String, usize>, HashMap<String, usize>) {
    let mut all = HashMap::new();
    let mut pos = HashMap::new();
    for (_, s) in corpus.sentences() {
        for t in &s.tokens {
            *all.entry(t.surface.clone()).or_insert(0) += 1;
        }
        for e in s.gold_entities().iter().filter(|e| e.kind.is_trigger() && e.span.width() == 1) {
            *pos.entry(s.tokens[e.span.start].surface.clone()).or_insert(0) += 1;
        }
    }
    (all, pos)
}

pub fn shift_summary(source: &DomainSpec, target: &DomainSpec, src: &AnnotatedCorpus, tgt: &AnnotatedCorpus) -> ShiftSummary {
    let a: BTreeSet<&String> = source.lexicon.iter().collect();
    let b: BTreeSet<&String> = target.lexicon.iter().collect();
    let union = a.union(&b).count();
    let lexicon_overlap = if union == 0 { 0.0 } else { a.intersection(&b).count() as f64 / union as f64 };

    let counts = crate::masking::trigger_counts(src);
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|x, y| y.1.cmp(x.1).then_with(|| x.0.cmp(y.0)));
    let top: BTreeSet<&str> = ranked.iter().take(100).map(|x| x.0.as_str()).collect();
    let tcounts = crate::masking::trigger_counts(tgt);
    let total: usize = tcounts.values().sum();
    let covered: usize = tcounts.iter().filter(|(k, _)| top.contains(k.as_str())).map(|x| x.1).sum();
    let top100_coverage = if total == 0 { 0.0 } else { covered as f64 / total as f64 };

    let (sa, sp) = occurrence_counts(src);
    let (ta, tp) = occurrence_counts(tgt);
    let mut gaps = Vec::new();
    for w in a.intersection(&b) {
        if let (Some(&ns), Some(&nt)) = (sa.get(*w), ta.get(*w)) {
            let rs = *sp.get(*w).unwrap_or(&0) as f64 / ns as f64;
            let rt = *tp.get(*w).unwrap_or(&0) as f64 / nt as f64;
            gaps.push(rt - rs);
        }
    }
    let mean_ratio_gap = if gaps.is_empty() { 0.0 } else { gaps.iter().sum::<f64>() / gaps.len() as f64 };
    ShiftSummary {
        lexicon_overlap,
        top100_coverage,
        mean_ratio_gap,
    }
}

/// Generates a source and a target domain and summarizes their shift.
pub fn make_shift_pair(
    source: &DomainSpec,
    target: &DomainSpec,
    n_source: usize,
    n_target: usize,
    n_unlabeled: usize,
) -> Result<ShiftPair> {
    let s = generate_domain(source, n_source, n_unlabeled)?;
    let t = generate_domain(target, n_target, n_unlabeled)?;
    let summary = shift_summary(source, target, &s.labeled, &t.labeled);
    Ok(ShiftPair {
        source: s,
        target: t,
        summary,
    })
}
