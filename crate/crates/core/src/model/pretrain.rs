//! Adaptive masked-language-model pretraining on unlabeled text.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::encoder::{encode, Dropout};
use super::loss::{accumulate, mlm_gradients, MlmExample};
use super::params::ModelParams;
use super::tape::Tape;
use super::tensor::Mat;
use crate::corpus::{Document, Vocab};
use crate::error::{Error, Result};
use crate::masking::{mlm_mask, MlmMaskConfig};
use crate::rng::{hash_key, keyed_rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    /// Sequences per gradient computation.
    pub batch_size: usize,
    /// Batches whose gradients are summed before one optimizer step.
    pub accumulation: usize,
    /// Tokens per chunk, before the domain indicator is prepended.
    pub chunk_len: usize,
    pub mlm_rate: f64,
    pub mixed_replacement: bool,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 10,
            batch_size: 32,
            accumulation: 1,
            chunk_len: 64,
            mlm_rate: crate::masking::DEFAULT_MLM_RATE,
            mixed_replacement: false,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Sizes of the chunks a document of `n` tokens is cut into.
pub fn chunk_lengths(n: usize, chunk_len: usize) -> Vec<usize> {
    (0..n).step_by(chunk_len.max(1)).map(|s| chunk_len.min(n - s)).collect()
}

/// Concatenates each document's tokens, cuts them into chunks of
/// `chunk_len` and prefixes every chunk with the document's domain
/// indicator.
pub fn chunk_documents(documents: &[Document], vocab: &Vocab, chunk_len: usize) -> Result<Vec<Vec<u32>>> {
    if chunk_len == 0 {
        return Err(Error::Config("chunk length must be positive".into()));
    }
    let mut out = Vec::new();
    for doc in documents {
        let dom = vocab.domain_id(&doc.domain).ok_or_else(|| {
            Error::Config(format!("vocabulary has no indicator token for domain {:?}", doc.domain))
        })?;
        let ids: Vec<u32> = doc
            .sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| vocab.id(&t.surface)))
            .collect();
        for chunk in ids.chunks(chunk_len) {
            let mut seq = Vec::with_capacity(chunk.len() + 1);
            seq.push(dom);
            seq.extend_from_slice(chunk);
            out.push(seq);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus("no unlabeled tokens to pretrain on".into()));
    }
    Ok(out)
}

/// The masked version of chunk `index` in `epoch`.
pub fn masked_chunk(chunk: &[u32], cfg: &PretrainConfig, vocab: &Vocab, epoch: usize, index: usize) -> MlmExample {
    let mc = MlmMaskConfig {
        rate: cfg.mlm_rate,
        mixed_replacement: cfg.mixed_replacement,
    };
    mlm_mask(chunk, mc, hash_key(&[cfg.seed, epoch as u64, index as u64]), vocab).into()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmEpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub masked_tokens: usize,
}

/// Loss, masked-token count and gradients of one chunk.
type ChunkGradient = (f64, usize, Vec<Option<Mat>>);

/// Optimizes `params` on the MLM loss over `documents`.
pub fn pretrain(
    documents: &[Document],
    vocab: &Vocab,
    params: &mut ModelParams,
    cfg: &PretrainConfig,
) -> Result<Vec<MlmEpochMetrics>> {
    if cfg.batch_size == 0 || cfg.accumulation == 0 {
        return Err(Error::Config("batch size and accumulation must be positive".into()));
    }
    if cfg.chunk_len + 1 > params.config.max_len {
        return Err(Error::SequenceTooLong {
            len: cfg.chunk_len + 1,
            max: params.config.max_len,
        });
    }
    let chunks = chunk_documents(documents, vocab, cfg.chunk_len)?;
    let mut opt = Adam::new(cfg.adam, params);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..chunks.len()).collect();
        order.shuffle(&mut keyed_rng(&[stream::SHUFFLE, cfg.seed, epoch as u64, 1]));
        let (mut epoch_loss, mut masked) = (0.0, 0usize);
        let mut pending: Vec<Option<Mat>> = Vec::new();
        let mut pending_batches = 0;
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (bi, batch) in batches.iter().enumerate() {
            let p: &ModelParams = params;
            let results: Vec<Result<ChunkGradient>> = batch
                .par_iter()
                .map(|&i| {
                    let ex = masked_chunk(&chunks[i], cfg, vocab, epoch, i);
                    let mut drop = Dropout::new(p.config.dropout, &[cfg.seed, epoch as u64, i as u64, 1]);
                    let (l, g) = mlm_gradients(p, &ex, Some(&mut drop))?;
                    Ok((l, ex.positions.len(), g))
                })
                .collect();
            let mut batch_loss = 0.0;
            for r in results {
                let (l, n, g) = r?;
                batch_loss += l;
                masked += n;
                accumulate(&mut pending, g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            pending_batches += 1;
            if pending_batches == cfg.accumulation || bi + 1 == batches.len() {
                opt.step(params, &pending);
                pending.clear();
                pending_batches = 0;
                step += 1;
            }
        }
        metrics.push(MlmEpochMetrics {
            epoch,
            loss: epoch_loss,
            masked_tokens: masked,
        });
    }
    Ok(metrics)
}

/// Most likely original id at each masked position.
pub fn mlm_predict(params: &ModelParams, ex: &MlmExample) -> Result<Vec<u32>> {
    if ex.positions.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let h = encode(&mut tape, params, &vars, &ex.ids, None)?;
    let rows = tape.gather_rows(h, ex.positions.clone());
    let l = &params.layout;
    let logits = tape.affine(rows, vars[l.mlm_w], vars[l.mlm_b]);
    let z = tape.value(logits);
    Ok((0..z.rows)
        .map(|r| {
            let row = z.row(r);
            (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0) as u32
        })
        .collect())
}

/// `epoch,L_MLM`
pub fn write_mlm_metrics<W: Write>(metrics: &[MlmEpochMetrics], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "L_MLM"])?;
    for m in metrics {
        out.write_record([m.epoch.to_string(), m.loss.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_mlm_metrics(metrics: &[MlmEpochMetrics], path: &Path) -> Result<()> {
    write_mlm_metrics(metrics, std::fs::File::create(path)?)
}
