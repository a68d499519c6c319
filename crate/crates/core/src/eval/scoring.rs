use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::Counts;
use crate::corpus::AnnotatedCorpus;
use crate::error::Result;
use crate::schema::{build_events, Entity, EntityType, Relation, Span, Subtype};

/// Counts per entity type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub by_type: BTreeMap<EntityType, Counts>,
}

impl ScoreCounts {
    pub fn get(&self, kind: EntityType) -> Counts {
        self.by_type.get(&kind).copied().unwrap_or_default()
    }

    pub fn entry(&mut self, kind: EntityType) -> &mut Counts {
        self.by_type.entry(kind).or_default()
    }

    pub fn add(&mut self, other: &ScoreCounts) {
        for (k, c) in &other.by_type {
            self.entry(*k).add(*c);
        }
    }

    /// Sum over all types.
    pub fn overall(&self) -> Counts {
        let mut t = Counts::default();
        for c in self.by_type.values() {
            t.add(*c);
        }
        t
    }

    fn only(mut self, keep: impl Fn(EntityType) -> bool) -> Self {
        self.by_type.retain(|k, _| keep(*k));
        self
    }
}

/// Matches two multisets of keys one-to-one; equal keys are
/// interchangeable, so greedy matching is maximal.
fn match_keys<K: std::hash::Hash + Eq>(gold: Vec<K>, pred: Vec<K>) -> Counts {
    let mut avail: HashMap<K, u64> = HashMap::new();
    let n_gold = gold.len() as u64;
    for k in gold {
        *avail.entry(k).or_insert(0) += 1;
    }
    let mut tp = 0;
    let n_pred = pred.len() as u64;
    for k in pred {
        if let Some(n) = avail.get_mut(&k) {
            if *n > 0 {
                *n -= 1;
                tp += 1;
            }
        }
    }
    Counts {
        tp,
        fp: n_pred - tp,
        fn_: n_gold - tp,
    }
}

type ArgKey = (EntityType, Option<Subtype>, Span, Span);

/// Every (argument, linked trigger span) membership of the sentence's
/// events.
fn argument_keys(entities: &[Entity], relations: &[Relation]) -> Vec<ArgKey> {
    build_events(entities, relations)
        .into_iter()
        .flat_map(|ev| {
            let t = ev.trigger.span;
            ev.arguments
                .into_iter()
                .map(move |a| (a.kind, a.subtype, a.span, t))
        })
        .collect()
}

/// Token credit for span-only arguments: within each (type, trigger span)
/// group, a token position covered by `g` gold and `p` predicted spans
/// contributes `min(g, p)` true positives.
fn span_only_counts(gold: &[ArgKey], pred: &[ArgKey], kind: EntityType) -> Counts {
    let mut cover: HashMap<(Span, usize), (u64, u64)> = HashMap::new();
    let (mut n_gold, mut n_pred) = (0, 0);
    for &(k, _, span, trig) in gold {
        if k == kind {
            for pos in span.start..span.end {
                cover.entry((trig, pos)).or_default().0 += 1;
                n_gold += 1;
            }
        }
    }
    for &(k, _, span, trig) in pred {
        if k == kind {
            for pos in span.start..span.end {
                cover.entry((trig, pos)).or_default().1 += 1;
                n_pred += 1;
            }
        }
    }
    let tp: u64 = cover.values().map(|&(g, p)| g.min(p)).sum();
    Counts {
        tp,
        fp: n_pred - tp,
        fn_: n_gold - tp,
    }
}

/// Counts of every entity type for one sentence.
pub fn score_sentence(gold: (&[Entity], &[Relation]), pred: (&[Entity], &[Relation])) -> ScoreCounts {
    let mut out = ScoreCounts::default();
    let spans_of = |ents: &[Entity]| -> Vec<Span> {
        ents.iter().filter(|e| e.kind.is_trigger()).map(|e| e.span).collect()
    };
    *out.entry(EntityType::Trigger) = match_keys(spans_of(gold.0), spans_of(pred.0));
    let ga = argument_keys(gold.0, gold.1);
    let pa = argument_keys(pred.0, pred.1);
    for kind in EntityType::ALL {
        if kind.is_labeled_argument() {
            let sel = |v: &[ArgKey]| v.iter().filter(|k| k.0 == kind).copied().collect::<Vec<_>>();
            *out.entry(kind) = match_keys(sel(&ga), sel(&pa));
        } else if kind.is_span_only_argument() {
            *out.entry(kind) = span_only_counts(&ga, &pa, kind);
        }
    }
    out
}

/// Corpus-level counts for every type. Sentences without gold annotation
/// are scored against an empty gold set.
pub fn score_all(gold: &AnnotatedCorpus, pred: &AnnotatedCorpus) -> Result<ScoreCounts> {
    gold.check_aligned(pred)?;
    let mut out = ScoreCounts::default();
    for ((_, g), (_, p)) in gold.sentences().zip(pred.sentences()) {
        out.add(&score_sentence(
            (g.gold_entities(), g.gold_relations()),
            (p.gold_entities(), p.gold_relations()),
        ));
    }
    Ok(out)
}

pub fn score_triggers(gold: &AnnotatedCorpus, pred: &AnnotatedCorpus) -> Result<ScoreCounts> {
    Ok(score_all(gold, pred)?.only(EntityType::is_trigger))
}

pub fn score_labeled_args(gold: &AnnotatedCorpus, pred: &AnnotatedCorpus) -> Result<ScoreCounts> {
    Ok(score_all(gold, pred)?.only(EntityType::is_labeled_argument))
}

pub fn score_span_only_args(gold: &AnnotatedCorpus, pred: &AnnotatedCorpus) -> Result<ScoreCounts> {
    Ok(score_all(gold, pred)?.only(EntityType::is_span_only_argument))
}
