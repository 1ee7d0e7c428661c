//! Flat TOML experiment configuration.
//!
//! One file drives a whole sweep: every (strategy, labels-per-class, seed)
//! combination becomes an independent run cell. Unknown keys are rejected so
//! typos surface as usage errors instead of silently falling back to
//! defaults; every key has a default, so the empty file is a valid config.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::JsonlSchema;
use crate::error::{Error, Result};

fn default_data_source() -> String {
    "synthetic".into()
}
fn default_text_field() -> String {
    "text".into()
}
fn default_label_field() -> String {
    "label".into()
}
fn default_features_field() -> String {
    "features".into()
}
fn default_featurizer_dim() -> usize {
    256
}
fn default_synthetic_classes() -> usize {
    8
}
fn default_synthetic_dim() -> usize {
    32
}
fn default_synthetic_per_class() -> usize {
    300
}
fn default_synthetic_separation() -> f64 {
    6.0
}
fn default_synthetic_noise_scale() -> f64 {
    1.0
}
fn default_synthetic_hard_noise_multiplier() -> f64 {
    3.0
}
fn default_test_fraction() -> f64 {
    0.1
}
fn default_validation_fraction() -> f64 {
    0.1
}
fn default_labels_per_class() -> Vec<usize> {
    vec![5]
}
fn default_weight_init_scale() -> f64 {
    0.01
}
fn default_learning_rate() -> f64 {
    1e-4
}
fn default_adam_beta1() -> f64 {
    0.9
}
fn default_adam_beta2() -> f64 {
    0.999
}
fn default_adam_epsilon() -> f64 {
    1e-8
}
fn default_batch_size() -> usize {
    32
}
fn default_unlabeled_ratio() -> usize {
    1
}
fn default_unsupervised_weight() -> f64 {
    20.0
}
fn default_total_iterations() -> u64 {
    3000
}
fn default_eval_interval() -> u64 {
    100
}
fn default_strategies() -> Vec<String> {
    vec!["psl".into()]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_confidence_threshold() -> f64 {
    0.9
}
fn default_debias_lambda() -> f64 {
    0.4
}
fn default_queue_capacity() -> usize {
    200
}
fn default_samples_per_class() -> usize {
    5
}
fn default_ema_momentum() -> f64 {
    0.9
}
fn default_ood_shift() -> f64 {
    3.0
}
fn default_ood_seed() -> u64 {
    424242
}
fn default_output_dir() -> String {
    "runs".into()
}

/// Every knob of an experiment sweep, one flat key each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "synthetic" or "jsonl".
    #[serde(default = "default_data_source")]
    pub data_source: String,
    /// Input corpus for `data_source = "jsonl"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsonl_path: Option<String>,
    #[serde(default = "default_text_field")]
    pub text_field: String,
    #[serde(default = "default_label_field")]
    pub label_field: String,
    #[serde(default = "default_features_field")]
    pub features_field: String,
    /// Fixed class order; inferred from the file in appearance order if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_vocabulary: Option<Vec<String>>,
    #[serde(default = "default_featurizer_dim")]
    pub featurizer_dim: usize,
    #[serde(default)]
    pub featurizer_seed: u64,

    #[serde(default = "default_synthetic_classes")]
    pub synthetic_classes: usize,
    #[serde(default = "default_synthetic_dim")]
    pub synthetic_dim: usize,
    #[serde(default = "default_synthetic_per_class")]
    pub synthetic_per_class: usize,
    #[serde(default = "default_synthetic_separation")]
    pub synthetic_separation: f64,
    /// Base noise scale for every class.
    #[serde(default = "default_synthetic_noise_scale")]
    pub synthetic_noise_scale: f64,
    /// Classes whose noise is multiplied by `synthetic_hard_noise_multiplier`.
    #[serde(default)]
    pub synthetic_hard_classes: Vec<usize>,
    #[serde(default = "default_synthetic_hard_noise_multiplier")]
    pub synthetic_hard_noise_multiplier: f64,
    #[serde(default)]
    pub synthetic_seed: u64,

    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// The k values of the sweep: one run cell per entry.
    #[serde(default = "default_labels_per_class")]
    pub labels_per_class: Vec<usize>,

    #[serde(default)]
    pub hidden_units: usize,
    #[serde(default = "default_weight_init_scale")]
    pub weight_init_scale: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_adam_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_adam_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_epsilon")]
    pub adam_epsilon: f64,

    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_unlabeled_ratio")]
    pub unlabeled_ratio: usize,
    #[serde(default = "default_unsupervised_weight")]
    pub unsupervised_weight: f64,
    #[serde(default = "default_total_iterations")]
    pub total_iterations: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,

    /// Strategy names; one run cell per entry. See `StrategyKind::name`.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    /// One run cell per seed; the seed drives the split and the training run.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_confidence_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "default_debias_lambda")]
    pub debias_lambda: f64,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_samples_per_class")]
    pub samples_per_class: usize,
    #[serde(default = "default_ema_momentum")]
    pub ema_momentum: f64,

    /// Train on the source corpus, evaluate the best checkpoint on a
    /// held-out target corpus too.
    #[serde(default)]
    pub ood_enabled: bool,
    /// Target corpus for jsonl sources. Synthetic sources instead derive the
    /// target by shifting every class mean by `ood_shift`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_target_jsonl_path: Option<String>,
    #[serde(default = "default_ood_shift")]
    pub ood_shift: f64,
    #[serde(default = "default_ood_seed")]
    pub ood_seed: u64,

    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config must parse via defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            key: "config".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        // An unreadable config path is a usage error, same as a bad key.
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "config".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        match self.data_source.as_str() {
            "synthetic" => {}
            "jsonl" => {
                if self.jsonl_path.is_none() {
                    return fail("jsonl_path", "required when data_source = \"jsonl\"");
                }
            }
            other => {
                return Err(Error::Config {
                    key: "data_source".into(),
                    message: format!("unknown source \"{other}\"; expected \"synthetic\" or \"jsonl\""),
                })
            }
        }
        if self.strategies.is_empty() {
            return fail("strategies", "at least one strategy is required");
        }
        for name in &self.strategies {
            crate::strategies::StrategyKind::parse(name)?;
        }
        if self.seeds.is_empty() {
            return fail("seeds", "at least one seed is required");
        }
        if self.labels_per_class.is_empty() || self.labels_per_class.contains(&0) {
            return fail("labels_per_class", "needs one or more positive k values");
        }
        if self.synthetic_hard_classes.iter().any(|&c| c >= self.synthetic_classes) {
            return fail(
                "synthetic_hard_classes",
                "class index outside [0, synthetic_classes)",
            );
        }
        if self.ood_enabled && self.data_source == "jsonl" && self.ood_target_jsonl_path.is_none() {
            return fail(
                "ood_target_jsonl_path",
                "required for out-of-distribution evaluation with a jsonl source",
            );
        }
        Ok(())
    }

    pub fn jsonl_schema(&self) -> JsonlSchema {
        JsonlSchema {
            text_field: self.text_field.clone(),
            label_field: self.label_field.clone(),
            features_field: self.features_field.clone(),
            vocabulary: self.label_vocabulary.clone(),
            dim: self.featurizer_dim,
            featurizer_seed: self.featurizer_seed,
        }
    }

    /// Per-class noise scales for the synthetic corpus: the base scale, with
    /// the listed hard classes multiplied up.
    pub fn synthetic_noise_scales(&self) -> Vec<f64> {
        (0..self.synthetic_classes)
            .map(|c| {
                if self.synthetic_hard_classes.contains(&c) {
                    self.synthetic_noise_scale * self.synthetic_hard_noise_multiplier
                } else {
                    self.synthetic_noise_scale
                }
            })
            .collect()
    }
}
