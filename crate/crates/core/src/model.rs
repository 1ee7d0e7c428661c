//! Softmax classifier (linear or one hidden layer), hand-rolled loss
//! gradients, and an adaptive-moment optimizer with decoupled weight decay.
//!
//! Parameters live in one flat `Vec<f64>` so the optimizer, checkpointing and
//! finite-difference checks all operate on a single vector. Layout:
//!
//! - linear (`hidden_units == 0`): `[W (D*C, row-major by input), b (C)]`
//! - MLP: `[W1 (D*H), b1 (H), W2 (H*C), b2 (C)]` with ReLU between layers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and initialization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub num_classes: usize,
    /// 0 = linear model; otherwise one ReLU hidden layer of this width.
    pub hidden_units: usize,
    pub weight_init_scale: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn param_count(&self) -> usize {
        if self.hidden_units == 0 {
            self.dim * self.num_classes + self.num_classes
        } else {
            self.dim * self.hidden_units
                + self.hidden_units
                + self.hidden_units * self.num_classes
                + self.num_classes
        }
    }
}

/// Optimizer hyperparameters (adaptive moments + decoupled weight decay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-4,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Trainable parameters plus optimizer moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub weights: Vec<f64>,
    pub moment1: Vec<f64>,
    pub moment2: Vec<f64>,
    pub step_count: u64,
}

impl ModelState {
    /// Gaussian weights scaled by `weight_init_scale / sqrt(fan_in)`, zero
    /// biases; deterministic from `config.seed`.
    pub fn init(config: &ModelConfig) -> ModelState {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.param_count();
        let mut weights = vec![0.0; n];
        let mut fill = |w: &mut [f64], fan_in: usize| {
            let scale = config.weight_init_scale / (fan_in as f64).sqrt();
            for x in w.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = scale * z;
            }
        };
        let (d, c, h) = (config.dim, config.num_classes, config.hidden_units);
        if h == 0 {
            fill(&mut weights[..d * c], d);
        } else {
            fill(&mut weights[..d * h], d);
            let start = d * h + h;
            fill(&mut weights[start..start + h * c], h);
        }
        ModelState {
            config: config.clone(),
            weights,
            moment1: vec![0.0; n],
            moment2: vec![0.0; n],
            step_count: 0,
        }
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.config.dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.dim,
                got: features.len(),
            });
        }
        Ok(())
    }
}

fn linear_layer(x: &[f64], w: &[f64], b: &[f64], out_dim: usize) -> Vec<f64> {
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * out_dim..(i + 1) * out_dim];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

/// Logits for a batch; one row of length C per input row.
pub fn forward(state: &ModelState, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let cfg = &state.config;
    let (d, c, h) = (cfg.dim, cfg.num_classes, cfg.hidden_units);
    let mut out = Vec::with_capacity(batch.len());
    for &x in batch {
        state.check_dim(x)?;
        let logits = if h == 0 {
            linear_layer(x, &state.weights[..d * c], &state.weights[d * c..], c)
        } else {
            let (w1, rest) = state.weights.split_at(d * h);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h * c);
            let mut hidden = linear_layer(x, w1, b1, h);
            for v in &mut hidden {
                *v = v.max(0.0);
            }
            linear_layer(&hidden, w2, b2, c)
        };
        out.push(logits);
    }
    Ok(out)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy −log p(target) computed via log-sum-exp, without forming
/// the probability vector (avoids log-of-rounded-value error).
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// One training item for [`loss_and_grad`]: features, target class, weight.
pub type WeightedItem<'a> = (&'a [f64], usize, f64);

/// Weighted-sum cross-entropy loss and its gradient with respect to the flat
/// parameter vector: `sum_i w_i * CE_i / divisor`.
///
/// The caller picks the divisor (batch size for a mean, a fixed normalizer
/// otherwise). Empty batch → loss 0, zero gradient.
pub fn loss_and_grad(
    state: &ModelState,
    items: &[WeightedItem<'_>],
    divisor: f64,
) -> Result<(f64, Vec<f64>)> {
    let cfg = &state.config;
    let (d, c, h) = (cfg.dim, cfg.num_classes, cfg.hidden_units);
    let mut grad = vec![0.0; state.weights.len()];
    if items.is_empty() {
        return Ok((0.0, grad));
    }
    assert!(divisor > 0.0, "loss divisor must be positive");
    let mut loss = 0.0;
    for &(x, target, weight) in items {
        state.check_dim(x)?;
        if target >= c {
            return Err(Error::InvalidInput(format!(
                "target class {target} outside [0, {c})"
            )));
        }
        if h == 0 {
            let logits = linear_layer(x, &state.weights[..d * c], &state.weights[d * c..], c);
            loss += weight * cross_entropy(&logits, target);
            let mut delta = softmax(&logits);
            delta[target] -= 1.0;
            let (gw, gb) = grad.split_at_mut(d * c);
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut gw[i * c..(i + 1) * c];
                for (g, &dk) in row.iter_mut().zip(&delta) {
                    *g += weight * xi * dk;
                }
            }
            for (g, &dk) in gb.iter_mut().zip(&delta) {
                *g += weight * dk;
            }
        } else {
            let (w1, rest) = state.weights.split_at(d * h);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h * c);
            let pre = linear_layer(x, w1, b1, h);
            let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
            let logits = linear_layer(&hidden, w2, b2, c);
            loss += weight * cross_entropy(&logits, target);
            let mut delta = softmax(&logits);
            delta[target] -= 1.0;
            // Backprop through the output layer.
            let mut dhidden = vec![0.0; h];
            {
                let (gw1, grest) = grad.split_at_mut(d * h);
                let (gb1, grest) = grest.split_at_mut(h);
                let (gw2, gb2) = grest.split_at_mut(h * c);
                for (j, &hj) in hidden.iter().enumerate() {
                    let row = &mut gw2[j * c..(j + 1) * c];
                    let wrow = &w2[j * c..(j + 1) * c];
                    let mut acc = 0.0;
                    for ((g, &dk), &wjk) in row.iter_mut().zip(&delta).zip(wrow) {
                        *g += weight * hj * dk;
                        acc += wjk * dk;
                    }
                    dhidden[j] = if pre[j] > 0.0 { acc } else { 0.0 };
                }
                for (g, &dk) in gb2.iter_mut().zip(&delta) {
                    *g += weight * dk;
                }
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &mut gw1[i * h..(i + 1) * h];
                    for (g, &dj) in row.iter_mut().zip(&dhidden) {
                        *g += weight * xi * dj;
                    }
                }
                for (g, &dj) in gb1.iter_mut().zip(&dhidden) {
                    *g += weight * dj;
                }
            }
        }
    }
    loss /= divisor;
    for g in &mut grad {
        *g /= divisor;
    }
    Ok((loss, grad))
}

/// One bias-corrected adaptive-moment step followed by decoupled weight
/// decay. Increments `step_count`. Errors on any non-finite gradient entry.
pub fn optimizer_step(
    state: &mut ModelState,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<()> {
    if grad.len() != state.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: state.weights.len(),
            got: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            step: state.step_count,
        });
    }
    let t = state.step_count + 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let bias1 = 1.0 - b1.powi(t as i32);
    let bias2 = 1.0 - b2.powi(t as i32);
    for i in 0..state.weights.len() {
        let g = grad[i];
        state.moment1[i] = b1 * state.moment1[i] + (1.0 - b1) * g;
        state.moment2[i] = b2 * state.moment2[i] + (1.0 - b2) * g * g;
        let m_hat = state.moment1[i] / bias1;
        let v_hat = state.moment2[i] / bias2;
        let w = state.weights[i];
        state.weights[i] = w
            - config.learning_rate
                * (m_hat / (v_hat.sqrt() + config.epsilon) + config.weight_decay * w);
    }
    state.step_count = t;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: ModelConfig,
    step_count: u64,
    weights: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "ssdebias-checkpoint-v1";

/// Serializes config + weights (not optimizer moments) as JSON.
pub fn save_checkpoint(state: &ModelState) -> String {
    serde_json::to_string(&CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        config: state.config.clone(),
        step_count: state.step_count,
        weights: state.weights.clone(),
    })
    .expect("checkpoint serialization cannot fail")
}

/// Restores a state saved by [`save_checkpoint`]. Moments reset to zero.
pub fn load_checkpoint(json: &str) -> Result<ModelState> {
    let file: CheckpointFile = serde_json::from_str(json)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::InvalidInput(format!(
            "unsupported checkpoint format \"{}\"",
            file.format
        )));
    }
    let n = file.config.param_count();
    if file.weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: file.weights.len(),
        });
    }
    Ok(ModelState {
        moment1: vec![0.0; n],
        moment2: vec![0.0; n],
        config: file.config,
        weights: file.weights,
        step_count: file.step_count,
    })
}
