//! Pseudo-label selection policies.
//!
//! Every policy consumes one unlabeled batch of logits and produces a
//! [`PseudoBatch`] of weighted training items. The baseline keeps confident
//! argmax predictions; the debiasing variants reshape either the selection
//! rule (logit adjustment, adaptive thresholds) or the trained set itself
//! (memory-bank rebalancing). Oracle variants consult withheld ground truth
//! to bound what perfect pseudo-label quality and/or quantity would buy.

use serde::{Deserialize, Serialize};

use crate::bank::{BankEntry, MemoryBank};
use crate::error::{Error, Result};
use crate::model::softmax;
use crate::trackers::SatState;

/// The selection policy family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Fixed-threshold confidence filtering of argmax predictions.
    Psl,
    /// Selection on logits shifted by −λ·log p̄ (running class prior).
    LogitAdjust,
    /// Per-class thresholds adapted from running confidence and prior.
    Sat,
    /// Bank rebalancing: push selections, train on equal per-class samples.
    DeCrisisMb,
    /// Bank rebalancing with inverse-prior per-class sample counts.
    DeCrisisMbAdSampling,
    /// Oracle: keep only pseudo-labels that match withheld ground truth.
    OracleDeleteIncorrect,
    /// Oracle: bank rebalancing without any correctness filtering
    /// (isolates the quantity-balancing effect).
    OracleEqualSampling,
    /// Oracle: correctness filter, then bank rebalancing (quality and
    /// quantity both perfect).
    OracleDeletePlusEqual,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Psl,
        StrategyKind::LogitAdjust,
        StrategyKind::Sat,
        StrategyKind::DeCrisisMb,
        StrategyKind::DeCrisisMbAdSampling,
        StrategyKind::OracleDeleteIncorrect,
        StrategyKind::OracleEqualSampling,
        StrategyKind::OracleDeletePlusEqual,
    ];

    /// Stable name used in configs, directory layouts and reports.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Psl => "psl",
            StrategyKind::LogitAdjust => "logit_adjust",
            StrategyKind::Sat => "sat",
            StrategyKind::DeCrisisMb => "decrisis_mb",
            StrategyKind::DeCrisisMbAdSampling => "decrisis_mb_adsampling",
            StrategyKind::OracleDeleteIncorrect => "oracle_delete_incorrect",
            StrategyKind::OracleEqualSampling => "oracle_equal_sampling",
            StrategyKind::OracleDeletePlusEqual => "oracle_delete_plus_equal",
        }
    }

    pub fn parse(name: &str) -> Result<StrategyKind> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config {
                key: "strategies".into(),
                message: format!(
                    "unknown strategy \"{name}\"; expected one of: {}",
                    StrategyKind::ALL.map(StrategyKind::name).join(", ")
                ),
            })
    }

    /// Whether the policy trains on memory-bank samples instead of the
    /// current batch's direct selections.
    pub fn is_bank_backed(self) -> bool {
        matches!(
            self,
            StrategyKind::DeCrisisMb
                | StrategyKind::DeCrisisMbAdSampling
                | StrategyKind::OracleEqualSampling
                | StrategyKind::OracleDeletePlusEqual
        )
    }

    /// Whether the policy reads withheld true labels.
    pub fn is_oracle(self) -> bool {
        matches!(
            self,
            StrategyKind::OracleDeleteIncorrect
                | StrategyKind::OracleEqualSampling
                | StrategyKind::OracleDeletePlusEqual
        )
    }
}

/// Policy choice plus every constant the policies read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Fixed confidence threshold τ for the non-adaptive policies.
    pub confidence_threshold: f64,
    /// λ: strength of the logit shift in `LogitAdjust`.
    pub debias_lambda: f64,
    /// Per-class queue capacity for bank-backed policies.
    pub queue_capacity: usize,
    /// N: per-class draw count for equal sampling (base count for adaptive).
    pub samples_per_class: usize,
    /// m: momentum of the running prior/confidence trackers.
    pub ema_momentum: f64,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> StrategyConfig {
        StrategyConfig {
            kind,
            confidence_threshold: 0.9,
            debias_lambda: 0.4,
            queue_capacity: 200,
            samples_per_class: 5,
            ema_momentum: 0.9,
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
        check(
            self.confidence_threshold > 0.0 && self.confidence_threshold < 1.0,
            "confidence_threshold",
            "must lie in (0, 1)",
        )?;
        check(self.debias_lambda >= 0.0, "debias_lambda", "must be nonnegative")?;
        check(self.queue_capacity > 0, "queue_capacity", "must be positive")?;
        check(
            self.samples_per_class > 0,
            "samples_per_class",
            "must be positive",
        )?;
        check(
            self.ema_momentum > 0.0 && self.ema_momentum < 1.0,
            "ema_momentum",
            "must lie in (0, 1)",
        )
    }
}

/// One unlabeled example as seen by a selection policy: borrowed features,
/// plus the withheld label for diagnostics and oracle modes.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledRow<'a> {
    pub id: u64,
    pub features: &'a [f64],
    pub hidden_label: Option<usize>,
}

/// One selected training item.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoItem {
    pub example_id: u64,
    pub features: Vec<f64>,
    pub pseudo_label: usize,
    pub weight: f64,
    pub confidence: f64,
    pub hidden_true_label: Option<usize>,
}

impl PseudoItem {
    fn from_bank_entry(e: BankEntry) -> PseudoItem {
        PseudoItem {
            example_id: e.example_id,
            features: e.features,
            pseudo_label: e.pseudo_label,
            weight: 1.0,
            confidence: e.confidence,
            hidden_true_label: e.hidden_true_label,
        }
    }

    fn to_bank_entry(&self, iteration: u64) -> BankEntry {
        BankEntry {
            example_id: self.example_id,
            features: self.features.clone(),
            pseudo_label: self.pseudo_label,
            confidence: self.confidence,
            iteration_created: iteration,
            hidden_true_label: self.hidden_true_label,
        }
    }
}

/// Counters describing one selection round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionDiagnostics {
    /// Pseudo-labels generated from the current batch, per class (before any
    /// oracle filtering or bank replacement).
    pub generated_per_class: Vec<u64>,
    /// Of the generated, how many match the withheld truth, per class.
    pub correct_per_class: Vec<u64>,
    /// Rows whose confidence fell at or below their threshold.
    pub rejected: u64,
    /// Items actually handed to the loss, per class.
    pub trained_per_class: Vec<u64>,
}

impl SelectionDiagnostics {
    fn new(num_classes: usize) -> SelectionDiagnostics {
        SelectionDiagnostics {
            generated_per_class: vec![0; num_classes],
            correct_per_class: vec![0; num_classes],
            rejected: 0,
            trained_per_class: vec![0; num_classes],
        }
    }
}

/// The items a selection round hands to the trainer, plus its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoBatch {
    pub items: Vec<PseudoItem>,
    pub diagnostics: SelectionDiagnostics,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Core selection: emit row `i` with label `argmax(probs[i])` iff
/// `max(probs[i]) > threshold(argmax)`. Strictly greater — boundary rows are
/// rejected. Diagnostics count generated/correct per class.
fn select_thresholded(
    rows: &[UnlabeledRow<'_>],
    select_probs: &[Vec<f64>],
    threshold_for: impl Fn(usize) -> f64,
    num_classes: usize,
) -> PseudoBatch {
    let mut diagnostics = SelectionDiagnostics::new(num_classes);
    let mut items = Vec::new();
    for (row, probs) in rows.iter().zip(select_probs) {
        let label = argmax(probs);
        let confidence = probs[label];
        if confidence > threshold_for(label) {
            diagnostics.generated_per_class[label] += 1;
            if row.hidden_label == Some(label) {
                diagnostics.correct_per_class[label] += 1;
            }
            items.push(PseudoItem {
                example_id: row.id,
                features: row.features.to_vec(),
                pseudo_label: label,
                weight: 1.0,
                confidence,
                hidden_true_label: row.hidden_label,
            });
        } else {
            diagnostics.rejected += 1;
        }
    }
    for item in &items {
        diagnostics.trained_per_class[item.pseudo_label] += 1;
    }
    PseudoBatch { items, diagnostics }
}

/// Fixed-threshold selection on plain softmax probabilities.
pub fn select_psl(rows: &[UnlabeledRow<'_>], logits: &[Vec<f64>], tau: f64) -> PseudoBatch {
    let num_classes = logits.first().map_or(0, Vec::len);
    let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
    select_thresholded(rows, &probs, |_| tau, num_classes)
}

/// Selection on adjusted logits z − λ·log p̄ (p̄ floored at 1e-3). Both the
/// argmax and the threshold test use the adjusted probabilities; the emitted
/// confidence is the adjusted one. The trainer's loss still flows through
/// the model's unadjusted forward pass against the emitted label.
pub fn select_logit_adjust(
    rows: &[UnlabeledRow<'_>],
    logits: &[Vec<f64>],
    p_bar: &[f64],
    lambda: f64,
    tau: f64,
) -> PseudoBatch {
    let num_classes = p_bar.len();
    let shift: Vec<f64> = p_bar.iter().map(|&p| lambda * p.max(1e-3).ln()).collect();
    let probs: Vec<Vec<f64>> = logits
        .iter()
        .map(|z| {
            let adjusted: Vec<f64> = z.iter().zip(&shift).map(|(zi, s)| zi - s).collect();
            softmax(&adjusted)
        })
        .collect();
    select_thresholded(rows, &probs, |_| tau, num_classes)
}

/// Selection against the per-class thresholds currently derived from
/// `sat`. The caller must have updated `sat` with this batch's plain
/// probabilities first.
pub fn select_sat(rows: &[UnlabeledRow<'_>], logits: &[Vec<f64>], sat: &SatState) -> PseudoBatch {
    let local = sat.local_thresholds();
    let num_classes = local.len();
    let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
    select_thresholded(rows, &probs, |class| local[class], num_classes)
}

/// Oracle correctness filter: keeps exactly the items whose pseudo-label
/// matches the withheld truth. Items without a withheld label are an error —
/// oracle modes need fully-labeled source data.
pub fn oracle_filter(batch: PseudoBatch, mode: StrategyKind) -> Result<PseudoBatch> {
    debug_assert!(mode.is_oracle());
    let mut kept = Vec::with_capacity(batch.items.len());
    for item in batch.items {
        let truth = item
            .hidden_true_label
            .ok_or(Error::MissingHiddenLabel { id: item.example_id })?;
        if truth == item.pseudo_label {
            kept.push(item);
        }
    }
    let mut diagnostics = batch.diagnostics;
    diagnostics.trained_per_class = vec![0; diagnostics.trained_per_class.len()];
    for item in &kept {
        diagnostics.trained_per_class[item.pseudo_label] += 1;
    }
    Ok(PseudoBatch {
        items: kept,
        diagnostics,
    })
}

/// Pushes `selected` into the bank, then replaces it with a bank draw (equal
/// counts, or inverse-prior counts when `p_bar` is given). The current
/// batch's direct selections are not trained on.
pub fn decrisis_step(
    selected: PseudoBatch,
    bank: &mut MemoryBank,
    samples_per_class: usize,
    p_bar: Option<&[f64]>,
    iteration: u64,
) -> PseudoBatch {
    let mut diagnostics = selected.diagnostics;
    bank.push(
        selected
            .items
            .iter()
            .map(|item| item.to_bank_entry(iteration))
            .collect(),
    );
    let drawn = match p_bar {
        None => bank.equal_sample(samples_per_class),
        Some(p) => bank.adaptive_sample(samples_per_class, p),
    };
    diagnostics.trained_per_class = vec![0; diagnostics.trained_per_class.len()];
    let items: Vec<PseudoItem> = drawn
        .into_iter()
        .map(|e| {
            diagnostics.trained_per_class[e.pseudo_label] += 1;
            PseudoItem::from_bank_entry(e)
        })
        .collect();
    PseudoBatch { items, diagnostics }
}

/// Everything one training run's selection policy owns: config, trackers,
/// bank, and the iteration counter.
#[derive(Debug, Clone)]
pub struct StrategyState {
    pub config: StrategyConfig,
    sat: SatState,
    bank: Option<MemoryBank>,
    iteration: u64,
}

impl StrategyState {
    pub fn new(config: StrategyConfig, num_classes: usize, bank_seed: u64) -> Result<StrategyState> {
        config.validate()?;
        let bank = config.kind.is_bank_backed().then(|| {
            MemoryBank::new(num_classes, config.queue_capacity, bank_seed)
        });
        Ok(StrategyState {
            sat: SatState::new(num_classes, config.ema_momentum),
            bank,
            iteration: 0,
            config,
        })
    }

    pub fn tau_global(&self) -> f64 {
        self.sat.tau_global()
    }

    pub fn p_bar(&self) -> &[f64] {
        self.sat.p_bar()
    }

    pub fn bank_lens(&self) -> Vec<usize> {
        self.bank
            .as_ref()
            .map_or_else(|| vec![0; self.p_bar().len()], MemoryBank::lens)
    }

    pub fn bank_starved(&self) -> Vec<u64> {
        self.bank
            .as_ref()
            .map_or_else(|| vec![0; self.p_bar().len()], |b| b.starved().to_vec())
    }

    /// One selection round. Trackers are always updated with the batch's
    /// plain probabilities first, then the configured policy runs.
    pub fn select(&mut self, rows: &[UnlabeledRow<'_>], logits: &[Vec<f64>]) -> Result<PseudoBatch> {
        debug_assert_eq!(rows.len(), logits.len());
        let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
        self.sat.update(&probs);
        let tau = self.config.confidence_threshold;
        let n = self.config.samples_per_class;
        let kind = self.config.kind;
        let batch = match kind {
            StrategyKind::Psl => select_psl(rows, logits, tau),
            StrategyKind::LogitAdjust => select_logit_adjust(
                rows,
                logits,
                self.sat.p_bar(),
                self.config.debias_lambda,
                tau,
            ),
            StrategyKind::Sat => select_sat(rows, logits, &self.sat),
            StrategyKind::DeCrisisMb => {
                let selected = select_psl(rows, logits, tau);
                decrisis_step(selected, self.bank.as_mut().unwrap(), n, None, self.iteration)
            }
            StrategyKind::DeCrisisMbAdSampling => {
                let selected = select_psl(rows, logits, tau);
                let p_bar = self.sat.p_bar().to_vec();
                decrisis_step(
                    selected,
                    self.bank.as_mut().unwrap(),
                    n,
                    Some(&p_bar),
                    self.iteration,
                )
            }
            StrategyKind::OracleDeleteIncorrect => {
                oracle_filter(select_psl(rows, logits, tau), kind)?
            }
            StrategyKind::OracleEqualSampling => {
                let selected = select_psl(rows, logits, tau);
                decrisis_step(selected, self.bank.as_mut().unwrap(), n, None, self.iteration)
            }
            StrategyKind::OracleDeletePlusEqual => {
                let filtered = oracle_filter(select_psl(rows, logits, tau), kind)?;
                decrisis_step(filtered, self.bank.as_mut().unwrap(), n, None, self.iteration)
            }
        };
        self.iteration += 1;
        Ok(batch)
    }
}
