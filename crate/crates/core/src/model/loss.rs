use std::collections::HashMap;

use super::encoder::{encode, Dropout};
use super::heads::{entity_logits, pair_reprs, relation_logits, span_reprs};
use super::params::ModelParams;
use super::sampling::sample_negatives;
use super::tape::{Tape, Var};
use super::tensor::Mat;
use crate::corpus::{Sentence, Vocab};
use crate::error::Result;
use crate::schema::{MergedAnnotation, Span};

/// One sentence prepared for the joint objective. `ids` starts with
/// `[CLS]`; `pairs` index into `spans`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub ids: Vec<u32>,
    pub spans: Vec<Span>,
    pub labels: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub pair_labels: Vec<f64>,
}

impl TrainingExample {
    /// Gold entities and relations of `gold` followed by sampled negatives.
    pub fn build<R: rand::Rng>(
        sentence: &Sentence,
        gold: &MergedAnnotation,
        n_ent: usize,
        n_rel: usize,
        max_width: usize,
        rng: &mut R,
    ) -> Self {
        let mut ids = Vec::with_capacity(sentence.len() + 1);
        ids.push(Vocab::CLS);
        ids.extend(sentence.tokens.iter().map(|t| t.vocab_id));
        let (neg_spans, neg_pairs) = sample_negatives(sentence.len(), gold, n_ent, n_rel, max_width, rng);
        let mut spans: Vec<Span> = gold.entities.iter().map(|e| e.span).collect();
        let mut labels: Vec<usize> = gold.entities.iter().map(|e| e.label.index()).collect();
        spans.extend(&neg_spans);
        labels.extend(std::iter::repeat_n(0, neg_spans.len()));
        let index: HashMap<&str, usize> = gold
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect();
        let mut pairs = Vec::new();
        let mut pair_labels = Vec::new();
        for r in &gold.relations {
            if let (Some(&h), Some(&t)) = (index.get(r.head.as_str()), index.get(r.tail.as_str())) {
                pairs.push((h, t));
                pair_labels.push(1.0);
            }
        }
        pairs.extend(&neg_pairs);
        pair_labels.extend(std::iter::repeat_n(0.0, neg_pairs.len()));
        TrainingExample {
            ids,
            spans,
            labels,
            pairs,
            pair_labels,
        }
    }
}

/// Entity and relation parts of the joint loss; the joint value is their
/// sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointLoss {
    pub entity: f64,
    pub relation: f64,
}

impl JointLoss {
    pub fn joint(&self) -> f64 {
        self.entity + self.relation
    }

    pub fn add(&mut self, other: JointLoss) {
        self.entity += other.entity;
        self.relation += other.relation;
    }
}

/// Records the joint loss of one example; returns (entity, relation, joint)
/// nodes. The relation node is absent when the example has no pairs.
pub fn joint_forward<'p>(
    tape: &mut Tape<'p>,
    params: &'p ModelParams,
    vars: &[Var],
    ex: &TrainingExample,
    dropout: Option<&mut Dropout>,
) -> Result<(Var, Option<Var>, Var)> {
    let hidden = encode(tape, params, vars, &ex.ids, dropout)?;
    let reprs = span_reprs(tape, params, vars, hidden, &ex.spans);
    let logits = entity_logits(tape, params, vars, reprs);
    let entity = tape.softmax_cross_entropy(logits, &ex.labels);
    if ex.pairs.is_empty() {
        return Ok((entity, None, entity));
    }
    let pr = pair_reprs(tape, hidden, reprs, &ex.spans, &ex.pairs);
    let rl = relation_logits(tape, params, vars, pr);
    let relation = tape.bce_with_logits(rl, &ex.pair_labels);
    let joint = tape.sum_scalars(&[entity, relation]);
    Ok((entity, Some(relation), joint))
}

fn collect(tape: &Tape<'_>, vars: &[Var], out: Var) -> Vec<Option<Mat>> {
    let mut g = tape.backward(out);
    vars.iter().map(|v| g.take(*v)).collect()
}

/// Evaluation-mode joint loss summed over examples.
pub fn joint_loss(params: &ModelParams, examples: &[TrainingExample]) -> Result<JointLoss> {
    let mut total = JointLoss::default();
    for ex in examples {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let (e, r, _) = joint_forward(&mut tape, params, &vars, ex, None)?;
        total.add(JointLoss {
            entity: tape.scalar(e),
            relation: r.map_or(0.0, |r| tape.scalar(r)),
        });
    }
    Ok(total)
}

/// Joint loss of one example and its gradient for every parameter tensor
/// (`None` where the tensor does not influence the loss).
pub fn joint_gradients(
    params: &ModelParams,
    ex: &TrainingExample,
    dropout: Option<&mut Dropout>,
) -> Result<(JointLoss, Vec<Option<Mat>>)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let (e, r, j) = joint_forward(&mut tape, params, &vars, ex, dropout)?;
    let loss = JointLoss {
        entity: tape.scalar(e),
        relation: r.map_or(0.0, |r| tape.scalar(r)),
    };
    Ok((loss, collect(&tape, &vars, j)))
}

/// One MLM-masked sequence: `ids` with masks applied, the masked positions
/// and the original ids there.
#[derive(Debug, Clone, PartialEq)]
pub struct MlmExample {
    pub ids: Vec<u32>,
    pub positions: Vec<usize>,
    pub originals: Vec<u32>,
}

impl From<crate::masking::MlmMasked> for MlmExample {
    fn from(m: crate::masking::MlmMasked) -> Self {
        MlmExample {
            ids: m.ids,
            positions: m.positions,
            originals: m.originals,
        }
    }
}

/// Records the MLM loss; `None` when nothing is masked.
pub fn mlm_forward<'p>(
    tape: &mut Tape<'p>,
    params: &'p ModelParams,
    vars: &[Var],
    ex: &MlmExample,
    dropout: Option<&mut Dropout>,
) -> Result<Option<Var>> {
    if ex.positions.is_empty() {
        return Ok(None);
    }
    let hidden = encode(tape, params, vars, &ex.ids, dropout)?;
    let rows = tape.gather_rows(hidden, ex.positions.clone());
    let l = &params.layout;
    let logits = tape.affine(rows, vars[l.mlm_w], vars[l.mlm_b]);
    let targets: Vec<usize> = ex.originals.iter().map(|&t| t as usize).collect();
    Ok(Some(tape.softmax_cross_entropy(logits, &targets)))
}

/// Evaluation-mode MLM loss summed over examples.
pub fn mlm_loss(params: &ModelParams, examples: &[MlmExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        if let Some(l) = mlm_forward(&mut tape, params, &vars, ex, None)? {
            total += tape.scalar(l);
        }
    }
    Ok(total)
}

pub fn mlm_gradients(
    params: &ModelParams,
    ex: &MlmExample,
    dropout: Option<&mut Dropout>,
) -> Result<(f64, Vec<Option<Mat>>)> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    match mlm_forward(&mut tape, params, &vars, ex, dropout)? {
        Some(l) => Ok((tape.scalar(l), collect(&tape, &vars, l))),
        None => Ok((0.0, vec![None; vars.len()])),
    }
}

/// Adds `src` into `dst` elementwise, tensor by tensor.
pub fn accumulate(dst: &mut Vec<Option<Mat>>, src: Vec<Option<Mat>>) {
    if dst.is_empty() {
        *dst = src;
        return;
    }
    for (d, s) in dst.iter_mut().zip(src) {
        match (d.as_mut(), s) {
            (Some(d), Some(s)) => d.add_assign(&s),
            (None, Some(s)) => *d = Some(s),
            (_, None) => {}
        }
    }
}
