//! Central finite-difference check of the analytic gradients.

use rand::seq::index::sample;

use super::loss::{joint_gradients, joint_loss, mlm_gradients, mlm_loss, MlmExample, TrainingExample};
use super::params::ModelParams;
use super::tensor::Mat;
use crate::error::Result;
use crate::rng::{keyed_rng, stream};

/// Denominator floor of the relative error. Summed losses carry rounding
/// noise of roughly `1e-16 · L / ε` in a central difference, so parameters
/// with vanishing gradient would otherwise report noise as error.
pub const DEFAULT_ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedParam {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: Vec<CheckedParam>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&CheckedParam> {
        self.checked.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

/// Checks `n` scalars drawn uniformly from the tensors that receive a
/// gradient.
pub fn gradient_check<F>(
    params: &ModelParams,
    grads: &[Option<Mat>],
    loss: F,
    epsilon: f64,
    n: usize,
    seed: u64,
    floor: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&ModelParams) -> Result<f64>,
{
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (t, g) in grads.iter().enumerate() {
        if let Some(g) = g {
            candidates.extend((0..g.len()).map(|k| (t, k)));
        }
    }
    let mut rng = keyed_rng(&[stream::GRADCHECK, seed]);
    let picks = sample(&mut rng, candidates.len(), n.min(candidates.len()));
    let mut probe = params.clone();
    let mut checked = Vec::with_capacity(picks.len());
    for i in picks.into_iter() {
        let (t, k) = candidates[i];
        let orig = probe.tensors[t].data[k];
        probe.tensors[t].data[k] = orig + epsilon;
        let plus = loss(&probe)?;
        probe.tensors[t].data[k] = orig - epsilon;
        let minus = loss(&probe)?;
        probe.tensors[t].data[k] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let analytic = grads[t].as_ref().map_or(0.0, |g| g.data[k]);
        checked.push(CheckedParam {
            tensor: params.names[t].clone(),
            index: k,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric, floor),
        });
    }
    let max_rel_error = checked.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, checked })
}

/// Gradient check of the evaluation-mode joint loss over `examples`.
pub fn check_joint(
    params: &ModelParams,
    examples: &[TrainingExample],
    epsilon: f64,
    n: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut grads = Vec::new();
    for ex in examples {
        super::loss::accumulate(&mut grads, joint_gradients(params, ex, None)?.1);
    }
    gradient_check(
        params,
        &grads,
        |p| joint_loss(p, examples).map(|l| l.joint()),
        epsilon,
        n,
        seed,
        DEFAULT_ABS_FLOOR,
    )
}

/// Gradient check of the evaluation-mode MLM loss over `examples`.
pub fn check_mlm(params: &ModelParams, examples: &[MlmExample], epsilon: f64, n: usize, seed: u64) -> Result<GradCheckReport> {
    let mut grads = Vec::new();
    for ex in examples {
        super::loss::accumulate(&mut grads, mlm_gradients(params, ex, None)?.1);
    }
    gradient_check(params, &grads, |p| mlm_loss(p, examples), epsilon, n, seed, DEFAULT_ABS_FLOOR)
}
