use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Tensors without a gradient in a step are
/// left untouched, moments included.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ModelParams) -> Self {
        let zeros: Vec<Mat> = params.tensors.iter().map(|t| Mat::zeros(t.rows, t.cols)).collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Option<Mat>]) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let (p, m, v) = (&mut params.tensors[i], &mut self.m[i], &mut self.v[i]);
            for k in 0..g.data.len() {
                let gk = g.data[k];
                m.data[k] = beta1 * m.data[k] + (1.0 - beta1) * gk;
                v.data[k] = beta2 * v.data[k] + (1.0 - beta2) * gk * gk;
                let mh = m.data[k] / c1;
                let vh = v.data[k] / c2;
                p.data[k] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::EncoderConfig;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut c = EncoderConfig::desk(10);
        c.max_len = 4;
        let mut p = ModelParams::init(&c, 0).unwrap();
        let before = p.clone();
        let mut grads: Vec<Option<Mat>> = vec![None; p.tensors.len()];
        let b = p.layout.ent_b;
        let mut g = Mat::zeros(1, p.tensors[b].cols);
        g.data[0] = 3.0;
        g.data[1] = -0.5;
        grads[b] = Some(g);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        opt.step(&mut p, &grads);
        let d0 = p.tensors[b].data[0] - before.tensors[b].data[0];
        let d1 = p.tensors[b].data[1] - before.tensors[b].data[1];
        assert!((d0 + 1e-3).abs() < 1e-9 && (d1 - 1e-3).abs() < 1e-9);
        assert_eq!(p.tensors[b].data[2], before.tensors[b].data[2]);
        assert_eq!(p.tensors[p.layout.tok_emb], before.tensors[p.layout.tok_emb]);
    }
}
