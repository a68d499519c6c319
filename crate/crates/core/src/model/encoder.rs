use super::params::ModelParams;
use super::tape::{Tape, Var};
use super::tensor::Mat;
use crate::error::{Error, Result};
use crate::rng::{hash_key, keyed_rng, stream};
use rand::Rng;

/// Inverted dropout with masks keyed by a base key and a per-call counter,
/// so a forward pass is reproducible from its key alone.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    key: u64,
    site: u64,
}

impl Dropout {
    pub fn new(rate: f64, key: &[u64]) -> Self {
        Dropout {
            rate,
            key: hash_key(key),
            site: 0,
        }
    }

    fn mask(&mut self, rows: usize, cols: usize) -> Mat {
        let mut rng = keyed_rng(&[stream::DROPOUT, self.key, self.site]);
        self.site += 1;
        let keep = 1.0 / (1.0 - self.rate);
        let data = (0..rows * cols)
            .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        Mat::from_vec(rows, cols, data)
    }

    fn apply<'p>(this: &mut Option<&mut Dropout>, tape: &mut Tape<'p>, x: Var) -> Var {
        match this {
            Some(d) if d.rate > 0.0 => {
                let (r, c) = tape.value(x).shape();
                let m = d.mask(r, c);
                tape.mul_const(x, m)
            }
            _ => x,
        }
    }
}

/// Runs the pre-LN transformer over `ids` and returns the `n × hidden`
/// matrix of final-layer-normalized token vectors. `vars` are the
/// parameter leaves from [`ModelParams::register`]. Passing `None` for
/// `dropout` selects evaluation mode.
pub fn encode<'p>(
    tape: &mut Tape<'p>,
    params: &'p ModelParams,
    vars: &[Var],
    ids: &[u32],
    mut dropout: Option<&mut Dropout>,
) -> Result<Var> {
    let c = &params.config;
    let l = &params.layout;
    if ids.len() > c.max_len {
        return Err(Error::SequenceTooLong {
            len: ids.len(),
            max: c.max_len,
        });
    }
    if let Some(bad) = ids.iter().find(|&&i| i as usize >= c.vocab_size) {
        return Err(Error::Config(format!(
            "token id {bad} outside vocabulary of size {}",
            c.vocab_size
        )));
    }
    let n = ids.len();
    let tok = tape.gather_rows(vars[l.tok_emb], ids.iter().map(|&i| i as usize).collect());
    let pos = tape.gather_rows(vars[l.pos_emb], (0..n).collect());
    let mut x = tape.add(tok, pos);
    x = Dropout::apply(&mut dropout, tape, x);

    let hd = c.head_dim();
    let scale = 1.0 / (hd as f64).sqrt();
    for li in &l.layers {
        let h = tape.layer_norm(x, vars[li.ln1_g], vars[li.ln1_b]);
        let q = tape.affine(h, vars[li.wq], vars[li.bq]);
        let k = tape.affine(h, vars[li.wk], vars[li.bk]);
        let v = tape.affine(h, vars[li.wv], vars[li.bv]);
        let mut heads = Vec::with_capacity(c.heads);
        for head in 0..c.heads {
            let (a, b) = (head * hd, (head + 1) * hd);
            let qh = tape.slice_cols(q, a, b);
            let kh = tape.slice_cols(k, a, b);
            let vh = tape.slice_cols(v, a, b);
            let scores = tape.matmul_t(qh, kh);
            let scores = tape.scale(scores, scale);
            let probs = tape.softmax_rows(scores);
            heads.push(tape.matmul(probs, vh));
        }
        let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
        let attn = tape.affine(cat, vars[li.wo], vars[li.bo]);
        let attn = Dropout::apply(&mut dropout, tape, attn);
        x = tape.add(x, attn);

        let h = tape.layer_norm(x, vars[li.ln2_g], vars[li.ln2_b]);
        let f = tape.affine(h, vars[li.w1], vars[li.b1]);
        let f = tape.gelu(f);
        let f = tape.affine(f, vars[li.w2], vars[li.b2]);
        let f = Dropout::apply(&mut dropout, tape, f);
        x = tape.add(x, f);
    }
    Ok(tape.layer_norm(x, vars[l.lnf_g], vars[l.lnf_b]))
}

/// Evaluation-mode encoding as a plain matrix.
pub fn encode_eval(params: &ModelParams, ids: &[u32]) -> Result<Mat> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let h = encode(&mut tape, params, &vars, ids, None)?;
    Ok(tape.value(h).clone())
}
