//! Evaluation metrics and the per-run metrics log.
//!
//! The bias diagnostics all read one structure: a confusion matrix with rows
//! = actual class, columns = predicted class. Pseudo-label bookkeeping
//! (cumulative generated/correct counts per class) is tracked separately by
//! the trainer and scalarized here (worst-k accuracy, balance index).

use crate::error::{Error, Result};

/// Rows = actual class, columns = predicted class.
pub fn confusion_matrix(actual: &[usize], predicted: &[usize], num_classes: usize) -> Vec<Vec<u64>> {
    assert_eq!(actual.len(), predicted.len());
    let mut m = vec![vec![0u64; num_classes]; num_classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        m[a][p] += 1;
    }
    m
}

pub fn accuracy(confusion: &[Vec<u64>]) -> Result<f64> {
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let correct: u64 = confusion.iter().enumerate().map(|(i, row)| row[i]).sum();
    Ok(correct as f64 / total as f64)
}

/// Unweighted mean of per-class F1. A class with no true and no predicted
/// positives contributes F1 = 0 — classes a model ignores entirely drag the
/// score down rather than vanishing from it.
pub fn macro_f1(confusion: &[Vec<u64>]) -> Result<f64> {
    let c = confusion.len();
    let total: u64 = confusion.iter().flatten().sum();
    if c == 0 || total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let mut sum = 0.0;
    for k in 0..c {
        let tp = confusion[k][k];
        let actual: u64 = confusion[k].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[k]).sum();
        // F1 = 2tp / (actual + predicted); 0 when the denominator is 0.
        if actual + predicted > 0 {
            sum += 2.0 * tp as f64 / (actual + predicted) as f64;
        }
    }
    Ok(sum / c as f64)
}

/// Per-class recall: diagonal / row sum. A class with no actual examples in
/// the evaluated split is an error naming that class.
pub fn classwise_accuracy(confusion: &[Vec<u64>]) -> Result<Vec<f64>> {
    confusion
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let actual: u64 = row.iter().sum();
            if actual == 0 {
                Err(Error::EmptyClassRow(k))
            } else {
                Ok(row[k] as f64 / actual as f64)
            }
        })
        .collect()
}

/// Mean pseudo-label accuracy of the k worst classes. Per-class accuracy is
/// correct/generated, with 0 for classes that never generated a pseudo-label
/// (an ignored class is exactly the failure this metric exposes).
pub fn worst_k_psl_accuracy(generated: &[u64], correct: &[u64], k: usize) -> f64 {
    assert_eq!(generated.len(), correct.len());
    assert!(k >= 1 && k <= generated.len(), "k must lie in [1, C]");
    let mut accs: Vec<f64> = generated
        .iter()
        .zip(correct)
        .map(|(&g, &c)| if g == 0 { 0.0 } else { c as f64 / g as f64 })
        .collect();
    accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    accs[..k].iter().sum::<f64>() / k as f64
}

/// Normalized entropy of a count distribution: H(counts/total)/ln C.
/// 1 = perfectly balanced, 0 = all mass on one class.
pub fn balance_index(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::ZeroCountTotal);
    }
    if counts.len() == 1 {
        return Ok(1.0); // one class is trivially balanced
    }
    let total = total as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let p = n as f64 / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy / (counts.len() as f64).ln())
}

/// One logged evaluation interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub iteration: u64,
    /// Validation recall per class.
    pub per_class_accuracy: Vec<f64>,
    pub macro_f1: f64,
    /// Cumulative pseudo-labels generated per class since iteration 0.
    pub psl_generated: Vec<u64>,
    /// Cumulative correct pseudo-labels per class.
    pub psl_correct: Vec<u64>,
    pub tau_global: f64,
    pub p_bar: Vec<f64>,
    pub bank_lens: Vec<usize>,
    pub starved: Vec<u64>,
}

/// Final held-out evaluation of the best checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
}

/// The full per-run log: one record per evaluation interval plus the final
/// test record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub num_classes: usize,
    pub records: Vec<IntervalRecord>,
    pub test: Option<TestRecord>,
}

impl MetricsLog {
    pub fn new(num_classes: usize) -> MetricsLog {
        MetricsLog {
            num_classes,
            records: Vec::new(),
            test: None,
        }
    }

    pub fn push(&mut self, record: IntervalRecord) {
        debug_assert_eq!(record.per_class_accuracy.len(), self.num_classes);
        self.records.push(record);
    }

    /// CSV over all interval records. Column layout (C = class count):
    /// `iteration, acc_class_0..C-1, macro_f1, psl_count_0..C-1,
    /// psl_correct_0..C-1, tau_global, p_bar_0..C-1, bank_len_0..C-1,
    /// starved_0..C-1`. Floats use the shortest round-trip form, so equal
    /// runs serialize to identical bytes.
    pub fn to_csv(&self) -> String {
        let c = self.num_classes;
        let mut header = vec!["iteration".to_string()];
        let cols = |prefix: &str| (0..c).map(move |k| format!("{prefix}_{k}")).collect::<Vec<_>>();
        header.extend(cols("acc_class"));
        header.push("macro_f1".into());
        header.extend(cols("psl_count"));
        header.extend(cols("psl_correct"));
        header.push("tau_global".into());
        header.extend(cols("p_bar"));
        header.extend(cols("bank_len"));
        header.extend(cols("starved"));
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.records {
            let mut fields = vec![r.iteration.to_string()];
            fields.extend(r.per_class_accuracy.iter().map(f64::to_string));
            fields.push(r.macro_f1.to_string());
            fields.extend(r.psl_generated.iter().map(u64::to_string));
            fields.extend(r.psl_correct.iter().map(u64::to_string));
            fields.push(r.tau_global.to_string());
            fields.extend(r.p_bar.iter().map(f64::to_string));
            fields.extend(r.bank_lens.iter().map(usize::to_string));
            fields.extend(r.starved.iter().map(u64::to_string));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}
