//! Sweep execution: one run cell per (strategy, labels-per-class, seed),
//! each writing its artifacts under a deterministic directory.
//!
//! Layout: `<output_dir>/<strategy>/k<k>/seed<seed>/` containing
//! `metrics.csv` (per-interval log), `summary.json` (final metrics + config
//! echo) and `checkpoint.json` (best-validation model). Cells are fully
//! independent and run in parallel; they share only the immutable datasets.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    generate_synthetic, load_jsonl, shift_class_means, split_kshot, Dataset, SplitSpec,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::metrics::balance_index;
use crate::model::{save_checkpoint, OptimizerConfig};
use crate::strategies::{StrategyConfig, StrategyKind};
use crate::trainer::{evaluate, run_training, TrainConfig};

/// The final record a run cell leaves behind in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: String,
    /// Position of the strategy in the config's list (report row order).
    pub strategy_index: usize,
    pub labels_per_class: usize,
    pub seed: u64,
    /// Test accuracy of the best-validation checkpoint.
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_accuracy: Vec<f64>,
    /// Normalized entropy of cumulative pseudo-label counts; absent when the
    /// run never generated a pseudo-label.
    pub balance_index: Option<f64>,
    pub psl_generated_final: Vec<u64>,
    pub psl_correct_final: Vec<u64>,
    pub best_iteration: u64,
    pub best_validation_macro_f1: Option<f64>,
    /// Target-corpus metrics; present only for out-of-distribution runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_macro_f1: Option<f64>,
    pub config: ExperimentConfig,
}

/// One unit of work in the sweep.
#[derive(Debug, Clone)]
struct Cell {
    strategy: StrategyKind,
    strategy_index: usize,
    labels_per_class: usize,
    seed: u64,
}

/// Builds the source dataset named by the config.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match config.data_source.as_str() {
        "synthetic" => generate_synthetic(&SyntheticSpec {
            num_classes: config.synthetic_classes,
            dim: config.synthetic_dim,
            per_class_count: config.synthetic_per_class,
            class_mean_separation: config.synthetic_separation,
            per_class_noise_scale: config.synthetic_noise_scales(),
            seed: config.synthetic_seed,
        }),
        "jsonl" => {
            let path = config.jsonl_path.as_ref().expect("validated");
            load_jsonl(Path::new(path), &config.jsonl_schema())
        }
        other => Err(Error::Config {
            key: "data_source".into(),
            message: format!("unknown source \"{other}\""),
        }),
    }
}

/// Builds the out-of-distribution target corpus, with ids offset past the
/// source's so the two id spaces are provably disjoint.
fn build_target(config: &ExperimentConfig, source: &Dataset) -> Result<Dataset> {
    let target = match config.data_source.as_str() {
        "synthetic" => shift_class_means(source, config.ood_shift, config.ood_seed),
        _ => {
            let path = config.ood_target_jsonl_path.as_ref().expect("validated");
            let target = load_jsonl(Path::new(path), &config.jsonl_schema())?;
            if target.num_classes != source.num_classes {
                return Err(Error::Config {
                    key: "ood_target_jsonl_path".into(),
                    message: format!(
                        "target has {} classes but source has {}",
                        target.num_classes, source.num_classes
                    ),
                });
            }
            if target.dim != source.dim {
                return Err(Error::Config {
                    key: "ood_target_jsonl_path".into(),
                    message: format!(
                        "target features are {}-dimensional but source features are {}-dimensional",
                        target.dim, source.dim
                    ),
                });
            }
            target
        }
    };
    let max_source_id = source.examples.iter().map(|e| e.id).max().unwrap_or(0);
    Ok(target.with_id_offset(max_source_id + 1))
}

fn cell_dir(root: &Path, cell: &Cell) -> PathBuf {
    root.join(cell.strategy.name())
        .join(format!("k{}", cell.labels_per_class))
        .join(format!("seed{}", cell.seed))
}

fn train_config_for(config: &ExperimentConfig, cell: &Cell) -> TrainConfig {
    TrainConfig {
        batch_size: config.batch_size,
        unlabeled_ratio: config.unlabeled_ratio,
        unsupervised_weight: config.unsupervised_weight,
        total_iterations: config.total_iterations,
        eval_interval: config.eval_interval,
        seed: cell.seed,
        strategy: StrategyConfig {
            kind: cell.strategy,
            confidence_threshold: config.confidence_threshold,
            debias_lambda: config.debias_lambda,
            queue_capacity: config.queue_capacity,
            samples_per_class: config.samples_per_class,
            ema_momentum: config.ema_momentum,
        },
        optimizer: OptimizerConfig {
            learning_rate: config.learning_rate,
            weight_decay: config.weight_decay,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            epsilon: config.adam_epsilon,
        },
        hidden_units: config.hidden_units,
        weight_init_scale: config.weight_init_scale,
    }
}

fn run_cell(
    config: &ExperimentConfig,
    dataset: &Dataset,
    target: Option<&Dataset>,
    cell: &Cell,
    root: &Path,
) -> Result<CellSummary> {
    let split = split_kshot(
        dataset,
        &SplitSpec {
            labels_per_class: cell.labels_per_class,
            test_fraction: config.test_fraction,
            validation_fraction: config.validation_fraction,
            seed: cell.seed,
        },
    )?;

    if let Some(target) = target {
        // Provenance gate: the ids the training loop may touch must be
        // disjoint from the target corpus before any training happens.
        let training: HashSet<u64> = split.training_ids().into_iter().collect();
        for ex in &target.examples {
            if training.contains(&ex.id) {
                return Err(Error::InvalidInput(format!(
                    "target example id {} overlaps the training pool",
                    ex.id
                )));
            }
        }
    }

    let train_config = train_config_for(config, cell);
    let result = run_training(&split, dataset.num_classes, dataset.dim, &train_config)?;
    let test = result
        .log
        .test
        .as_ref()
        .ok_or_else(|| Error::EmptyResults("run produced no test record".into()))?;

    let (generated, correct) = match result.log.records.last() {
        Some(r) => (r.psl_generated.clone(), r.psl_correct.clone()),
        None => (
            vec![0; dataset.num_classes],
            vec![0; dataset.num_classes],
        ),
    };
    let balance = balance_index(&generated).ok();

    let (target_accuracy, target_macro_f1) = match target {
        Some(target) => {
            let eval = evaluate(&result.best_model, &target.labeled_examples())?;
            (Some(eval.accuracy), Some(eval.macro_f1))
        }
        None => (None, None),
    };

    let summary = CellSummary {
        strategy: cell.strategy.name().into(),
        strategy_index: cell.strategy_index,
        labels_per_class: cell.labels_per_class,
        seed: cell.seed,
        accuracy: test.accuracy,
        macro_f1: test.macro_f1,
        per_class_accuracy: test.per_class_accuracy.clone(),
        balance_index: balance,
        psl_generated_final: generated,
        psl_correct_final: correct,
        best_iteration: result.best_iteration,
        best_validation_macro_f1: result.best_validation_macro_f1,
        target_accuracy,
        target_macro_f1,
        config: config.clone(),
    };

    let dir = cell_dir(root, cell);
    std::fs::create_dir_all(&dir)?;
    write_atomically(&dir.join("metrics.csv"), result.log.to_csv().as_bytes())?;
    write_atomically(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)
            .expect("summary serialization cannot fail")
            .as_bytes(),
    )?;
    write_atomically(
        &dir.join("checkpoint.json"),
        save_checkpoint(&result.best_model).as_bytes(),
    )?;
    Ok(summary)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every cell of the sweep, in parallel, and returns their summaries
/// in deterministic (strategy, k, seed) config order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CellSummary>> {
    config.validate()?;
    let dataset = build_dataset(config)?;
    let target = if config.ood_enabled {
        Some(build_target(config, &dataset)?)
    } else {
        None
    };
    let root = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&root)?;

    let mut cells = Vec::new();
    for (strategy_index, name) in config.strategies.iter().enumerate() {
        let strategy = StrategyKind::parse(name)?;
        for &k in &config.labels_per_class {
            for &seed in &config.seeds {
                cells.push(Cell {
                    strategy,
                    strategy_index,
                    labels_per_class: k,
                    seed,
                });
            }
        }
    }

    cells
        .par_iter()
        .map(|cell| run_cell(config, &dataset, target.as_ref(), cell, &root))
        .collect()
}

/// Writes the synthetic corpus from `config` as a features-JSONL file plus a
/// manifest declaring the label vocabulary and feature dimension.
pub fn generate_data_files(config: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let dataset = build_dataset(config)?;
    std::fs::create_dir_all(out_dir)?;
    let data_path = out_dir.join("data.jsonl");
    let manifest_path = out_dir.join("manifest.json");

    let mut lines = String::new();
    for ex in &dataset.examples {
        let mut record = serde_json::Map::new();
        record.insert(
            config.features_field.clone(),
            serde_json::to_value(&ex.features).expect("features serialize"),
        );
        if let Some(label) = ex.true_label {
            record.insert(
                config.label_field.clone(),
                serde_json::Value::String(dataset.label_names[label].clone()),
            );
        }
        lines.push_str(&serde_json::Value::Object(record).to_string());
        lines.push('\n');
    }
    write_atomically(&data_path, lines.as_bytes())?;

    let manifest = serde_json::json!({
        "labels": dataset.label_names,
        "dim": dataset.dim,
        "num_examples": dataset.len(),
    });
    write_atomically(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).unwrap().as_bytes(),
    )?;
    Ok((data_path, manifest_path))
}
