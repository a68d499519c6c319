//! Inference: label every enumerated span, link predicted arguments to
//! predicted triggers, and rebuild events.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{enumerate_spans, AnnotatedCorpus, Gold, Sentence, Vocab};
use crate::error::Result;
use crate::model::heads::{entity_logits, pair_reprs, relation_logits, span_reprs};
use crate::model::tape::{sigmoid, Tape};
use crate::model::{encode, ModelParams};
use crate::schema::{build_events, unmerge_assertion, Entity, Event, Label, MergedAnnotation, MergedEntity, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub relation_threshold: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { relation_threshold: 0.5 }
    }
}

/// Merged-space entities from per-span logits and the relation probability
/// for each candidate (trigger, argument) pair.
pub fn decode_logits<F>(
    spans: &[crate::schema::Span],
    logits: &crate::model::Mat,
    mut relation_prob: F,
    cfg: &DecodeConfig,
) -> MergedAnnotation
where
    F: FnMut(&[(usize, usize)]) -> Vec<f64>,
{
    let mut entities = Vec::new();
    for (i, span) in spans.iter().enumerate() {
        let row = logits.row(i);
        let best = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
        let label = Label::from_index(best).unwrap_or(Label::Negative);
        if label != Label::Negative {
            entities.push(MergedEntity {
                id: format!("P{}", entities.len() + 1),
                label,
                span: *span,
            });
        }
    }
    let mut pairs = Vec::new();
    for (h, he) in entities.iter().enumerate() {
        if !he.label.is_trigger() {
            continue;
        }
        for (t, te) in entities.iter().enumerate() {
            if !te.label.is_trigger() {
                pairs.push((h, t));
            }
        }
    }
    let mut relations = Vec::new();
    if !pairs.is_empty() {
        for (&(h, t), p) in pairs.iter().zip(relation_prob(&pairs)) {
            if p >= cfg.relation_threshold {
                relations.push(Relation {
                    head: entities[h].id.clone(),
                    tail: entities[t].id.clone(),
                });
            }
        }
    }
    MergedAnnotation { entities, relations }
}

/// Predicts the merged-space annotation of one sentence.
pub fn predict_merged(params: &ModelParams, sentence: &Sentence, cfg: &DecodeConfig) -> Result<MergedAnnotation> {
    if sentence.is_empty() {
        return Ok(MergedAnnotation::default());
    }
    let mut ids = Vec::with_capacity(sentence.len() + 1);
    ids.push(Vocab::CLS);
    ids.extend(sentence.tokens.iter().map(|t| t.vocab_id));
    let spans = enumerate_spans(sentence, params.config.max_span_width);
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let hidden = encode(&mut tape, params, &vars, &ids, None)?;
    let reprs = span_reprs(&mut tape, params, &vars, hidden, &spans);
    let logits = entity_logits(&mut tape, params, &vars, reprs);
    let logit_mat = tape.value(logits).clone();
    let mut kept_rows = Vec::new();
    for i in 0..spans.len() {
        let row = logit_mat.row(i);
        if (1..row.len()).any(|k| row[k] > row[0]) {
            kept_rows.push(i);
        }
    }
    Ok(decode_logits(
        &spans,
        &logit_mat,
        |pairs| {
            // pairs index predicted entities, which are the kept rows in order
            let span_pairs: Vec<(usize, usize)> = pairs.iter().map(|&(h, t)| (kept_rows[h], kept_rows[t])).collect();
            let pr = pair_reprs(&mut tape, hidden, reprs, &spans, &span_pairs);
            let rl = relation_logits(&mut tape, params, &vars, pr);
            tape.value(rl).data.iter().map(|&z| sigmoid(z)).collect()
        },
        cfg,
    ))
}

/// Predicted entities and relations of one sentence, with assertions split
/// off their triggers.
pub fn predict_sentence(params: &ModelParams, sentence: &Sentence, cfg: &DecodeConfig) -> Result<(Vec<Entity>, Vec<Relation>)> {
    let merged = predict_merged(params, sentence, cfg)?;
    Ok(unmerge_assertion(&merged.entities, &merged.relations))
}

/// One event per trigger with the arguments linked to it.
pub fn construct_events(entities: &[Entity], relations: &[Relation]) -> Vec<Event> {
    build_events(entities, relations)
}

/// A copy of `corpus` whose annotations are the model's predictions.
/// Sentences are decoded in parallel.
pub fn predict_corpus(params: &ModelParams, corpus: &AnnotatedCorpus, cfg: &DecodeConfig) -> Result<AnnotatedCorpus> {
    let ids: Vec<_> = corpus.sentences().map(|(id, _)| id).collect();
    let preds: Vec<Result<Gold>> = ids
        .par_iter()
        .map(|&id| {
            let (entities, relations) = predict_sentence(params, corpus.sentence(id), cfg)?;
            Ok(Gold { entities, relations })
        })
        .collect();
    let mut preds = preds.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    Ok(corpus.with_annotations(|_, _| preds.next().expect("one prediction per sentence")))
}
