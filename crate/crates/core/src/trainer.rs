//! The semi-supervised training loop.
//!
//! Each iteration draws a labeled batch of size B and an unlabeled batch of
//! size μB (both pools recycle with a fresh shuffle every epoch), lets the
//! configured strategy turn the unlabeled logits into a pseudo-labeled
//! batch, and takes one optimizer step on
//!
//! `L = L_s + w_u · L_u`
//!
//! where `L_s` is mean cross-entropy over the labeled batch and `L_u` is the
//! weighted cross-entropy sum over the pseudo-batch divided by μB (for
//! direct-selection strategies, so absent items contribute zero) or by the
//! trained-batch size (for bank-backed strategies, whose items are not a
//! subset of the current μB rows).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{LabeledExample, Split};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, classwise_accuracy, confusion_matrix, macro_f1, IntervalRecord, MetricsLog,
};
use crate::model::{
    forward, loss_and_grad, optimizer_step, ModelConfig, ModelState, OptimizerConfig, WeightedItem,
};
use crate::strategies::{PseudoBatch, StrategyConfig, StrategyState, UnlabeledRow};

/// Everything one training run needs beyond the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// B: labeled batch size.
    pub batch_size: usize,
    /// μ: unlabeled batch size as a multiple of B.
    pub unlabeled_ratio: usize,
    /// w_u: weight of the unsupervised loss term.
    pub unsupervised_weight: f64,
    pub total_iterations: u64,
    /// Validation metrics are logged every this many iterations (and at the
    /// final iteration).
    pub eval_interval: u64,
    pub seed: u64,
    pub strategy: StrategyConfig,
    pub optimizer: OptimizerConfig,
    /// 0 = linear classifier; otherwise one ReLU hidden layer.
    pub hidden_units: usize,
    pub weight_init_scale: f64,
}

impl TrainConfig {
    pub fn new(strategy: StrategyConfig, total_iterations: u64, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 32,
            unlabeled_ratio: 1,
            unsupervised_weight: 20.0,
            total_iterations,
            eval_interval: 100,
            seed,
            strategy,
            optimizer: OptimizerConfig::default(),
            hidden_units: 0,
            weight_init_scale: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config {
                    key: key.into(),
                    message: message.into(),
                })
            }
        };
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        check(self.unlabeled_ratio >= 1, "unlabeled_ratio", "must be at least 1")?;
        check(
            self.unsupervised_weight >= 0.0,
            "unsupervised_weight",
            "must be nonnegative",
        )?;
        check(self.eval_interval >= 1, "eval_interval", "must be at least 1")?;
        check(
            self.optimizer.learning_rate > 0.0,
            "learning_rate",
            "must be positive",
        )?;
        check(
            self.weight_init_scale > 0.0,
            "weight_init_scale",
            "must be positive",
        )
    }
}

/// Final model, best-validation checkpoint, and the full metrics log.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_model: ModelState,
    /// Checkpoint with the highest logged validation macro-F1 (the final
    /// model when nothing was logged).
    pub best_model: ModelState,
    pub best_iteration: u64,
    pub best_validation_macro_f1: Option<f64>,
    pub log: MetricsLog,
}

/// Loss values from one step, for diagnostics and decomposition checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub total: f64,
    pub supervised: f64,
    pub unsupervised: f64,
}

/// Deterministic child seeds for the independent random streams of one run.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer over (seed, stream).
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Endless pass over `0..n` in shuffled order, reshuffling at each epoch
/// boundary. `n == 0` yields empty batches.
struct Cycler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Cycler {
    fn new(n: usize, seed: u64) -> Cycler {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Cycler { order, pos: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        if self.order.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Loss and gradient of `L_s + w_u · L_u` for frozen batches.
///
/// `L_s` is mean cross-entropy over `labeled`; `L_u` is the weighted
/// cross-entropy sum over `pseudo.items` divided by `unsup_divisor`. Pure in
/// its inputs, so it can be checked against finite differences.
pub fn combined_loss_and_grad(
    state: &ModelState,
    labeled: &[(&[f64], usize)],
    pseudo: &PseudoBatch,
    unsup_divisor: f64,
    unsupervised_weight: f64,
) -> Result<(StepLosses, Vec<f64>)> {
    let labeled_items: Vec<WeightedItem<'_>> =
        labeled.iter().map(|&(x, y)| (x, y, 1.0)).collect();
    let (l_s, grad_s) = loss_and_grad(state, &labeled_items, labeled.len().max(1) as f64)?;
    let pseudo_items: Vec<WeightedItem<'_>> = pseudo
        .items
        .iter()
        .map(|item| (item.features.as_slice(), item.pseudo_label, item.weight))
        .collect();
    let (l_u, grad_u) = loss_and_grad(state, &pseudo_items, unsup_divisor)?;
    let mut grad = grad_s;
    for (g, gu) in grad.iter_mut().zip(&grad_u) {
        *g += unsupervised_weight * gu;
    }
    Ok((
        StepLosses {
            total: l_s + unsupervised_weight * l_u,
            supervised: l_s,
            unsupervised: l_u,
        },
        grad,
    ))
}

/// The divisor of the unsupervised loss for this strategy and pseudo-batch.
pub fn unsupervised_divisor(
    strategy: &StrategyConfig,
    unlabeled_batch_size: usize,
    pseudo: &PseudoBatch,
) -> f64 {
    if strategy.kind.is_bank_backed() {
        pseudo.items.len().max(1) as f64
    } else {
        unlabeled_batch_size.max(1) as f64
    }
}

/// One iteration: select pseudo-labels for the unlabeled batch, combine the
/// losses, take one optimizer step. Returns the losses and the pseudo-batch
/// (for diagnostics accumulation).
pub fn train_step(
    model: &mut ModelState,
    labeled: &[(&[f64], usize)],
    unlabeled: &[UnlabeledRow<'_>],
    strategy: &mut StrategyState,
    config: &TrainConfig,
) -> Result<(StepLosses, PseudoBatch)> {
    let feats: Vec<&[f64]> = unlabeled.iter().map(|r| r.features).collect();
    let logits = forward(model, &feats)?;
    let pseudo = strategy.select(unlabeled, &logits)?;
    let divisor = unsupervised_divisor(&config.strategy, unlabeled.len(), &pseudo);
    let (losses, grad) =
        combined_loss_and_grad(model, labeled, &pseudo, divisor, config.unsupervised_weight)?;
    if !losses.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: model.step_count,
            supervised: losses.supervised,
            unsupervised: losses.unsupervised,
        });
    }
    optimizer_step(model, &grad, &config.optimizer)?;
    Ok((losses, pseudo))
}

/// Accuracy, macro-F1, per-class recall and the confusion matrix of argmax
/// predictions on a labeled set.
pub struct EvalResult {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
}

pub fn evaluate(model: &ModelState, examples: &[LabeledExample]) -> Result<EvalResult> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let feats: Vec<&[f64]> = examples.iter().map(|e| e.features.as_slice()).collect();
    let logits = forward(model, &feats)?;
    let predicted: Vec<usize> = logits
        .iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    let actual: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let confusion = confusion_matrix(&actual, &predicted, model.config.num_classes);
    Ok(EvalResult {
        accuracy: accuracy(&confusion)?,
        macro_f1: macro_f1(&confusion)?,
        per_class_accuracy: classwise_accuracy(&confusion)?,
        confusion,
    })
}

/// Runs the full loop over a [`Split`]: `total_iterations` steps with
/// validation metrics logged every `eval_interval` iterations (and at the
/// final one), best-validation-macro-F1 checkpointing, and a final test
/// evaluation of the best checkpoint.
pub fn run_training(
    split: &Split,
    num_classes: usize,
    dim: usize,
    config: &TrainConfig,
) -> Result<RunResult> {
    config.validate()?;
    if split.labeled_train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let model_config = ModelConfig {
        dim,
        num_classes,
        hidden_units: config.hidden_units,
        weight_init_scale: config.weight_init_scale,
        seed: derive_seed(config.seed, 0),
    };
    let mut model = ModelState::init(&model_config);
    let mut strategy = StrategyState::new(
        config.strategy.clone(),
        num_classes,
        derive_seed(config.seed, 1),
    )?;
    let mut labeled_cycler = Cycler::new(split.labeled_train.len(), derive_seed(config.seed, 2));
    let mut unlabeled_cycler =
        Cycler::new(split.unlabeled_train.len(), derive_seed(config.seed, 3));

    let mut log = MetricsLog::new(num_classes);
    let mut cumulative_generated = vec![0u64; num_classes];
    let mut cumulative_correct = vec![0u64; num_classes];
    let mut best: Option<(f64, u64, ModelState)> = None;

    let unlabeled_batch = config.batch_size * config.unlabeled_ratio;
    for iter in 0..config.total_iterations {
        let labeled_idx = labeled_cycler.next_batch(config.batch_size);
        let labeled: Vec<(&[f64], usize)> = labeled_idx
            .iter()
            .map(|&i| {
                let e = &split.labeled_train[i];
                (e.features.as_slice(), e.label)
            })
            .collect();
        let unlabeled_idx = unlabeled_cycler.next_batch(unlabeled_batch);
        let unlabeled: Vec<UnlabeledRow<'_>> = unlabeled_idx
            .iter()
            .map(|&i| {
                let e = &split.unlabeled_train[i];
                UnlabeledRow {
                    id: e.id,
                    features: &e.features,
                    hidden_label: e.hidden_true_label(),
                }
            })
            .collect();
        let (_, pseudo) = train_step(&mut model, &labeled, &unlabeled, &mut strategy, config)?;
        for c in 0..num_classes {
            cumulative_generated[c] += pseudo.diagnostics.generated_per_class[c];
            cumulative_correct[c] += pseudo.diagnostics.correct_per_class[c];
        }

        let iteration = iter + 1;
        if iteration % config.eval_interval == 0 || iteration == config.total_iterations {
            let eval = evaluate(&model, &split.validation)?;
            if best
                .as_ref()
                .is_none_or(|(best_f1, _, _)| eval.macro_f1 > *best_f1)
            {
                best = Some((eval.macro_f1, iteration, model.clone()));
            }
            log.push(IntervalRecord {
                iteration,
                per_class_accuracy: eval.per_class_accuracy,
                macro_f1: eval.macro_f1,
                psl_generated: cumulative_generated.clone(),
                psl_correct: cumulative_correct.clone(),
                tau_global: strategy.tau_global(),
                p_bar: strategy.p_bar().to_vec(),
                bank_lens: strategy.bank_lens(),
                starved: strategy.bank_starved(),
            });
        }
    }

    let (best_validation_macro_f1, best_iteration, best_model) = match best {
        Some((f1, iteration, state)) => (Some(f1), iteration, state),
        None => (None, 0, model.clone()),
    };
    let mut result = RunResult {
        final_model: model,
        best_model,
        best_iteration,
        best_validation_macro_f1,
        log,
    };
    if !split.test.is_empty() {
        let eval = evaluate(&result.best_model, &split.test)?;
        result.log.test = Some(crate::metrics::TestRecord {
            accuracy: eval.accuracy,
            macro_f1: eval.macro_f1,
            per_class_accuracy: eval.per_class_accuracy,
            confusion: eval.confusion,
        });
    }
    Ok(result)
}
