//! Supervised fine-tuning on the joint entity/relation objective.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::encoder::Dropout;
use super::loss::{accumulate, joint_gradients, JointLoss, TrainingExample};
use super::params::ModelParams;
use super::tensor::Mat;
use crate::corpus::{AnnotatedCorpus, SentenceId};
use crate::error::{Error, Result};
use crate::masking::{apply_dynamic_mask, PhraseList};
use crate::rng::{keyed_rng, stream};
use crate::schema::{merge_sentence, MergedAnnotation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub neg_entities: usize,
    pub neg_relations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 15,
            adam: AdamConfig::default(),
            neg_entities: 100,
            neg_relations: 100,
            seed: 0,
        }
    }
}

/// Dynamic trigger masking applied afresh in every epoch.
#[derive(Debug, Clone, Copy)]
pub struct MaskingSetup<'a> {
    pub phrases: &'a PhraseList,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: JointLoss,
    pub masked_tokens: usize,
}

/// Gold annotations in the merged label space, one entry per annotated
/// sentence.
pub fn merged_gold(corpus: &AnnotatedCorpus) -> Result<Vec<(SentenceId, MergedAnnotation)>> {
    corpus
        .sentences()
        .filter(|(_, s)| s.gold.is_some())
        .map(|(id, s)| Ok((id, merge_sentence(s.gold_entities(), s.gold_relations())?)))
        .collect()
}

fn sentence_key(seed: u64, epoch: usize, id: SentenceId) -> [u64; 4] {
    [seed, epoch as u64, id.document as u64, id.sentence as u64]
}

/// Builds the epoch's training example for one sentence.
pub fn epoch_example(
    corpus: &AnnotatedCorpus,
    id: SentenceId,
    gold: &MergedAnnotation,
    params: &ModelParams,
    cfg: &TrainConfig,
    epoch: usize,
) -> TrainingExample {
    let k = sentence_key(cfg.seed, epoch, id);
    let mut rng = keyed_rng(&[stream::NEGATIVES, k[0], k[1], k[2], k[3]]);
    TrainingExample::build(
        corpus.sentence(id),
        gold,
        cfg.neg_entities,
        cfg.neg_relations,
        params.config.max_span_width,
        &mut rng,
    )
}

/// Trains `params` in place on the annotated sentences of `corpus`, whose
/// tokens must already carry vocabulary ids.
///
/// Each epoch shuffles the sentences, re-samples negatives and, when
/// `masking` is given, re-draws the trigger mask. Per-sentence gradients
/// are computed in parallel and summed in batch order, so results do not
/// depend on the thread count.
pub fn train(
    corpus: &AnnotatedCorpus,
    params: &mut ModelParams,
    cfg: &TrainConfig,
    masking: Option<MaskingSetup<'_>>,
) -> Result<Vec<EpochMetrics>> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let gold = merged_gold(corpus)?;
    if gold.is_empty() {
        return Err(Error::EmptyCorpus("no annotated sentences to train on".into()));
    }
    let limit = params.config.max_len - 1;
    if let Some((_, s)) = corpus.sentences().find(|(_, s)| s.len() > limit) {
        return Err(Error::SequenceTooLong {
            len: s.len() + 1,
            max: params.config.max_len,
        });
    }
    let mut opt = Adam::new(cfg.adam, params);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let (view, masked_tokens) = match masking {
            Some(m) => {
                let (c, plan) = apply_dynamic_mask(corpus, m.phrases, m.rate, epoch as u64, cfg.seed)?;
                (std::borrow::Cow::Owned(c), plan.len())
            }
            None => (std::borrow::Cow::Borrowed(corpus), 0),
        };
        let mut order: Vec<usize> = (0..gold.len()).collect();
        order.shuffle(&mut keyed_rng(&[stream::SHUFFLE, cfg.seed, epoch as u64]));
        let mut epoch_loss = JointLoss::default();
        for batch in order.chunks(cfg.batch_size) {
            let p: &ModelParams = params;
            let results: Vec<Result<(JointLoss, Vec<Option<Mat>>)>> = batch
                .par_iter()
                .map(|&i| {
                    let (id, g) = &gold[i];
                    let ex = epoch_example(&view, *id, g, p, cfg, epoch);
                    let k = sentence_key(cfg.seed, epoch, *id);
                    let mut drop = Dropout::new(p.config.dropout, &k);
                    joint_gradients(p, &ex, Some(&mut drop))
                })
                .collect();
            let mut grads: Vec<Option<Mat>> = Vec::new();
            let mut batch_loss = JointLoss::default();
            for r in results {
                let (l, g) = r?;
                batch_loss.add(l);
                accumulate(&mut grads, g);
            }
            if !batch_loss.joint().is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    loss: batch_loss.joint(),
                });
            }
            opt.step(params, &grads);
            epoch_loss.add(batch_loss);
            step += 1;
        }
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step,
                loss: f64::NAN,
            });
        }
        metrics.push(EpochMetrics {
            epoch,
            loss: epoch_loss,
            masked_tokens,
        });
    }
    Ok(metrics)
}

/// `epoch,L_Entity,L_Relation,L_Joint`
pub fn write_train_metrics<W: Write>(metrics: &[EpochMetrics], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "L_Entity", "L_Relation", "L_Joint"])?;
    for m in metrics {
        out.write_record([
            m.epoch.to_string(),
            m.loss.entity.to_string(),
            m.loss.relation.to_string(),
            m.loss.joint().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_train_metrics(metrics: &[EpochMetrics], path: &Path) -> Result<()> {
    write_train_metrics(metrics, std::fs::File::create(path)?)
}
