//! Per-parameter learned optimizer: a small MLP maps gradient statistics to
//! an update direction and log-magnitude.
//!
//! The rule must be told up front how many steps it will run for
//! (`total_steps_prompt`); two of its input features are the fraction of
//! training elapsed and remaining, so the same gradients produce different
//! updates under different prompts. The output head starts at zero, making
//! the untrained optimizer an exact no-op.

mod checkpoint;
mod es;
mod prompt;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use es::{
    es_gradient_estimate, es_gradient_estimate_with_eps, es_meta_gradient, meta_loss, meta_train,
    EsConfig, EsEstimate, MetaTask, MetaTrainOutcome, TaskDistribution,
};
pub use prompt::{estimate_step_prompt, refine_step_prompt, PilotRun};

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

const UPDATE_SCALE: f64 = 1e-3;
const LOG_SCALE_MIN: f64 = -10.0;
const LOG_SCALE_MAX: f64 = 3.0;
const RMS_EPSILON: f64 = 1e-8;

/// Accumulator timescales feeding the feature vector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureConfig {
    pub momentum_betas: Vec<f64>,
    pub rms_beta: f64,
    pub loss_ema_beta: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            momentum_betas: vec![0.5, 0.9, 0.99, 0.999],
            rms_beta: 0.999,
            loss_ema_beta: 0.9,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .momentum_betas
            .iter()
            .chain([&self.rms_beta, &self.loss_ema_beta]);
        for b in all {
            if !(0.0..1.0).contains(b) {
                return Err(Error::Config(format!("feature beta {b} outside [0,1)")));
            }
        }
        Ok(())
    }

    /// gradient, one slot per momentum, rms, grad·rms, loss delta, and the
    /// two prompt-progress features.
    pub fn feature_dim(&self) -> usize {
        self.momentum_betas.len() + 6
    }
}

/// Meta-parameters λ: a dense MLP stored flat, layer by layer, weights
/// (row-major, input × output) then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedOptimizerParams {
    pub mlp_weights: Vec<f64>,
    pub layer_sizes: Vec<usize>,
    pub feature_config: FeatureConfig,
}

/// Total weight count implied by the layer sizes (dense + bias per layer).
pub fn dense_param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| (w[0] + 1) * w[1])
        .sum()
}

impl LearnedOptimizerParams {
    /// Random tanh hidden layers, zero output head. Until meta-training moves
    /// the head, `learned_step` returns its input parameters unchanged.
    pub fn zero_init(layer_sizes: Vec<usize>, feature_config: FeatureConfig, seed: u64) -> Result<Self> {
        Self::validate_sizes(&layer_sizes, &feature_config)?;
        let n = dense_param_count(&layer_sizes);
        let mut weights = vec![0.0; n];
        let stream = RngStream::new(seed, "learned_init");
        let raw = stream.normals(n);
        let mut offset = 0;
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let block = (fan_in + 1) * fan_out;
            if l + 2 < layer_sizes.len() {
                let scale = 1.0 / (fan_in as f64).sqrt();
                for i in 0..fan_in * fan_out {
                    weights[offset + i] = raw[offset + i] * scale;
                }
                // biases stay zero
            }
            offset += block;
        }
        Ok(Self {
            mlp_weights: weights,
            layer_sizes,
            feature_config,
        })
    }

    pub fn default_architecture(seed: u64) -> Self {
        let cfg = FeatureConfig::default();
        let dim = cfg.feature_dim();
        Self::zero_init(vec![dim, 16, 16, 2], cfg, seed).expect("default sizes are valid")
    }

    fn validate_sizes(layer_sizes: &[usize], feature_config: &FeatureConfig) -> Result<()> {
        feature_config.validate()?;
        if layer_sizes.len() < 2 {
            return Err(Error::config("MLP needs at least input and output layers"));
        }
        if layer_sizes[0] != feature_config.feature_dim() {
            return Err(Error::Config(format!(
                "first layer size {} must equal feature dim {}",
                layer_sizes[0],
                feature_config.feature_dim()
            )));
        }
        if *layer_sizes.last().unwrap() != 2 {
            return Err(Error::config(
                "output layer must have exactly 2 units (direction, log-scale)",
            ));
        }
        if layer_sizes.iter().any(|s| *s == 0) {
            return Err(Error::config("layer sizes must be >= 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::validate_sizes(&self.layer_sizes, &self.feature_config)?;
        let expected = dense_param_count(&self.layer_sizes);
        if self.mlp_weights.len() != expected {
            return Err(Error::Structure {
                expected: format!("{expected} MLP weights for layers {:?}", self.layer_sizes),
                actual: format!("{} weights", self.mlp_weights.len()),
            });
        }
        Ok(())
    }

    pub fn with_weights(&self, mlp_weights: Vec<f64>) -> Result<Self> {
        let out = Self {
            mlp_weights,
            layer_sizes: self.layer_sizes.clone(),
            feature_config: self.feature_config.clone(),
        };
        out.validate()?;
        Ok(out)
    }

    /// Forward pass for one parameter's feature row: returns (direction,
    /// log-scale before clamping).
    fn forward(&self, features: &[f64], scratch: &mut MlpScratch) -> (f64, f64) {
        scratch.a.clear();
        scratch.a.extend_from_slice(features);
        let mut offset = 0;
        let n_layers = self.layer_sizes.len() - 1;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            scratch.b.clear();
            for j in 0..fan_out {
                let mut z = self.mlp_weights[offset + fan_in * fan_out + j];
                for (i, ai) in scratch.a.iter().enumerate() {
                    z += ai * self.mlp_weights[offset + i * fan_out + j];
                }
                scratch.b.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
            std::mem::swap(&mut scratch.a, &mut scratch.b);
            offset += (fan_in + 1) * fan_out;
        }
        (scratch.a[0], scratch.a[1])
    }
}

#[derive(Default)]
struct MlpScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Per-trial accumulators plus the fixed step prompt.
#[derive(Debug, Clone)]
pub struct LearnedOptimizerState {
    pub step: u64,
    total_steps_prompt: u64,
    pub momenta: Vec<ParamVector>,
    pub rms: ParamVector,
    pub loss_ema: Option<f64>,
}

impl LearnedOptimizerState {
    pub fn new(params: &ParamVector, total_steps_prompt: u64, config: &FeatureConfig) -> Result<Self> {
        if total_steps_prompt == 0 {
            return Err(Error::Precondition(
                "total_steps_prompt must be >= 1".to_string(),
            ));
        }
        config.validate()?;
        Ok(Self {
            step: 0,
            total_steps_prompt,
            momenta: vec![params.zeros_like(); config.momentum_betas.len()],
            rms: params.zeros_like(),
            loss_ema: None,
        })
    }

    /// The prompt is fixed at construction; running past it is legal (the
    /// progress feature saturates at 1).
    pub fn total_steps_prompt(&self) -> u64 {
        self.total_steps_prompt
    }

    fn check_initialized(&self, params: &ParamVector, config: &FeatureConfig) -> Result<()> {
        if self.momenta.len() != config.momentum_betas.len() {
            return Err(Error::State(format!(
                "state holds {} momentum buffers, feature config expects {}",
                self.momenta.len(),
                config.momentum_betas.len()
            )));
        }
        for m in &self.momenta {
            params.check_structure(m)?;
        }
        params.check_structure(&self.rms)?;
        Ok(())
    }
}

/// Advance the accumulators with `grad` and return the per-parameter feature
/// matrix, row-major `total_dim × feature_dim`. The state is updated in
/// place; features read the post-update accumulators.
pub fn extract_features(
    config: &FeatureConfig,
    state: &mut LearnedOptimizerState,
    grad: &ParamVector,
    loss: f64,
) -> Result<Vec<f64>> {
    state.check_initialized(grad, config)?;
    for (beta, m) in config.momentum_betas.iter().zip(state.momenta.iter_mut()) {
        *m = m.zip_map(grad, |mi, g| beta * mi + (1.0 - beta) * g)?;
    }
    state.rms = state
        .rms
        .zip_map(grad, |r, g| config.rms_beta * r + (1.0 - config.rms_beta) * g * g)?;
    let prev_ema = state.loss_ema.unwrap_or(loss);
    let ema = config.loss_ema_beta * prev_ema + (1.0 - config.loss_ema_beta) * loss;
    state.loss_ema = Some(ema);

    let t = state.step as f64;
    let big_t = state.total_steps_prompt as f64;
    let progress = (t / big_t).clamp(0.0, 1.0);
    let remaining = (1.0 - t / big_t).clamp(0.0, 1.0);
    let loss_delta = (ema - loss).tanh();

    let dim = grad.total_dim();
    let fdim = config.feature_dim();
    let mut features = vec![0.0; dim * fdim];
    let g_flat = grad.to_flat();
    let momenta_flat: Vec<Vec<f64>> = state.momenta.iter().map(|m| m.to_flat()).collect();
    let rms_flat = state.rms.to_flat();
    for p in 0..dim {
        let row = &mut features[p * fdim..(p + 1) * fdim];
        let mut k = 0;
        row[k] = g_flat[p].tanh();
        k += 1;
        for m in &momenta_flat {
            row[k] = m[p].tanh();
            k += 1;
        }
        let rsqrt = 1.0 / (rms_flat[p] + RMS_EPSILON).sqrt();
        row[k] = rsqrt.tanh();
        k += 1;
        row[k] = (g_flat[p] * rsqrt).tanh();
        k += 1;
        row[k] = loss_delta;
        k += 1;
        row[k] = progress;
        k += 1;
        row[k] = remaining;
    }
    Ok(features)
}

/// One learned-optimizer update: θ' = θ + d·exp(clamp(s, −10, 3))·1e-3 per
/// parameter, where (d, s) come from the MLP over that parameter's features.
pub fn learned_step(
    opt: &LearnedOptimizerParams,
    state: &LearnedOptimizerState,
    params: &ParamVector,
    grad: &ParamVector,
    loss: f64,
) -> Result<(ParamVector, LearnedOptimizerState)> {
    opt.validate()?;
    params.check_structure(grad)?;
    let mut next_state = state.clone();
    let features = extract_features(&opt.feature_config, &mut next_state, grad, loss)?;
    let fdim = opt.feature_config.feature_dim();
    let mut next = params.clone();
    let mut scratch = MlpScratch::default();
    for (p, theta) in next.values_mut().enumerate() {
        let row = &features[p * fdim..(p + 1) * fdim];
        let (d, s) = opt.forward(row, &mut scratch);
        let delta = d * s.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX).exp() * UPDATE_SCALE;
        *theta += delta;
    }
    if let Some(segment) = next.first_non_finite_segment() {
        return Err(Error::numeric("learned_step update", segment.to_string()));
    }
    next_state.step += 1;
    Ok((next, next_state))
}

/// λ that multiplies tanh(gradient) by the remaining-fraction feature:
/// direction = −gain·tanh(g)·(stuff), log-scale follows `remaining`. Used to
/// demonstrate prompt sensitivity without meta-training.
pub fn prompt_probe_params(gain: f64) -> LearnedOptimizerParams {
    let cfg = FeatureConfig::default();
    let fdim = cfg.feature_dim();
    let sizes = vec![fdim, 2, 2, 2];
    let mut w = vec![0.0; dense_param_count(&sizes)];
    let grad_idx = 0;
    let remaining_idx = fdim - 1;
    // layer 1: unit 0 reads tanh(g), unit 1 reads the remaining fraction
    w[grad_idx * 2] = 1.0;
    w[remaining_idx * 2 + 1] = 1.0;
    let l1 = (fdim + 1) * 2;
    // layer 2: pass-through (tanh compresses but keeps order)
    w[l1] = 1.0; // h2_0 <- h1_0
    w[l1 + 2 + 1] = 1.0; // h2_1 <- h1_1
    let l2 = l1 + 3 * 2;
    // output: d = −gain·h2_0, s = 3·h2_1 − 1.5
    w[l2] = -gain;
    w[l2 + 2 + 1] = 3.0;
    w[l2 + 2 * 2 + 1] = -1.5; // bias on s
    LearnedOptimizerParams {
        mlp_weights: w,
        layer_sizes: sizes,
        feature_config: cfg,
    }
}
