use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::config::EncoderConfig;
use super::tape::{Tape, Var};
use super::tensor::Mat;
use crate::error::Result;
use crate::rng::{keyed_rng, stream};
use crate::schema::LABEL_SPACE_SIZE;

#[derive(Debug, Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Normal(f64),
    Xavier,
}

/// Indices of one transformer layer's tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerIdx {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

/// Position of every named tensor in [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub layers: Vec<LayerIdx>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub size_emb: usize,
    pub ent_w: usize,
    pub ent_b: usize,
    pub rel_w: usize,
    pub rel_b: usize,
    pub mlm_w: usize,
    pub mlm_b: usize,
}

struct Builder {
    specs: Vec<(String, usize, usize, Init)>,
}

impl Builder {
    fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, init: Init) -> usize {
        self.specs.push((name.into(), rows, cols, init));
        self.specs.len() - 1
    }
}

fn plan(c: &EncoderConfig) -> (Layout, Vec<(String, usize, usize, Init)>) {
    let d = c.hidden;
    let mut b = Builder { specs: Vec::new() };
    let tok_emb = b.add("tok_emb", c.vocab_size, d, Init::Normal(0.5));
    let pos_emb = b.add("pos_emb", c.max_len, d, Init::Normal(0.1));
    let layers = (0..c.layers)
        .map(|l| {
            let p = |s: &str| format!("layer{l}.{s}");
            LayerIdx {
                ln1_g: b.add(p("ln1_g"), 1, d, Init::Ones),
                ln1_b: b.add(p("ln1_b"), 1, d, Init::Zeros),
                wq: b.add(p("wq"), d, d, Init::Xavier),
                bq: b.add(p("bq"), 1, d, Init::Zeros),
                wk: b.add(p("wk"), d, d, Init::Xavier),
                bk: b.add(p("bk"), 1, d, Init::Zeros),
                wv: b.add(p("wv"), d, d, Init::Xavier),
                bv: b.add(p("bv"), 1, d, Init::Zeros),
                wo: b.add(p("wo"), d, d, Init::Xavier),
                bo: b.add(p("bo"), 1, d, Init::Zeros),
                ln2_g: b.add(p("ln2_g"), 1, d, Init::Ones),
                ln2_b: b.add(p("ln2_b"), 1, d, Init::Zeros),
                w1: b.add(p("w1"), d, c.ff, Init::Xavier),
                b1: b.add(p("b1"), 1, c.ff, Init::Zeros),
                w2: b.add(p("w2"), c.ff, d, Init::Xavier),
                b2: b.add(p("b2"), 1, d, Init::Zeros),
            }
        })
        .collect();
    let layout = Layout {
        tok_emb,
        pos_emb,
        layers,
        lnf_g: b.add("lnf_g", 1, d, Init::Ones),
        lnf_b: b.add("lnf_b", 1, d, Init::Zeros),
        size_emb: b.add("size_emb", c.max_span_width, c.size_dim, Init::Normal(0.5)),
        ent_w: b.add("ent_w", c.span_dim(), LABEL_SPACE_SIZE, Init::Xavier),
        ent_b: b.add("ent_b", 1, LABEL_SPACE_SIZE, Init::Zeros),
        rel_w: b.add("rel_w", c.pair_dim(), 1, Init::Xavier),
        rel_b: b.add("rel_b", 1, 1, Init::Zeros),
        mlm_w: b.add("mlm_w", d, c.vocab_size, Init::Xavier),
        mlm_b: b.add("mlm_b", 1, c.vocab_size, Init::Zeros),
    };
    (layout, b.specs)
}

/// All learnable tensors of the encoder and its three heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub layout: Layout,
    pub names: Vec<String>,
    pub tensors: Vec<Mat>,
}

impl ModelParams {
    /// Randomly initialized parameters; tensor `i` draws from its own stream
    /// keyed by `(seed, i)`.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = plan(config);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (i, (name, rows, cols, init)) in specs.into_iter().enumerate() {
            let mut rng = keyed_rng(&[stream::INIT, seed, i as u64]);
            let data = match init {
                Init::Zeros => vec![0.0; rows * cols],
                Init::Ones => vec![1.0; rows * cols],
                Init::Normal(std) => {
                    let n = Normal::new(0.0, std).expect("positive std");
                    (0..rows * cols).map(|_| n.sample(&mut rng)).collect()
                }
                Init::Xavier => {
                    let a = (6.0 / (rows + cols) as f64).sqrt();
                    (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect()
                }
            };
            names.push(name);
            tensors.push(Mat::from_vec(rows, cols, data));
        }
        Ok(ModelParams {
            config: config.clone(),
            layout,
            names,
            tensors,
        })
    }

    /// Parameters with every tensor zero, except layer-norm gains which are
    /// one.
    pub fn zeros(config: &EncoderConfig) -> Result<Self> {
        let mut p = Self::init(config, 0)?;
        for (name, t) in p.names.iter().zip(p.tensors.iter_mut()) {
            let fill = if name.ends_with("_g") { 1.0 } else { 0.0 };
            t.data.iter_mut().for_each(|x| *x = fill);
        }
        Ok(p)
    }

    /// The expected names and shapes for `config`, in declaration order.
    pub fn expected_shapes(config: &EncoderConfig) -> Vec<(String, usize, usize)> {
        plan(config).1.into_iter().map(|(n, r, c, _)| (n, r, c)).collect()
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }

    /// Registers every tensor as a borrowed leaf; the returned vector is
    /// indexed like `tensors`.
    pub fn register<'p>(&'p self, tape: &mut Tape<'p>) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(t)).collect()
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.names.iter().zip(&self.tensors) {
            h.update(name.as_bytes());
            h.update((t.rows as u64).to_le_bytes());
            h.update((t.cols as u64).to_le_bytes());
            for x in &t.data {
                h.update(x.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
