//! Running statistics over unlabeled-batch predictions.
//!
//! [`EmaProb`] keeps an exponential moving average p̄ of the model's mean
//! predicted class distribution; [`SatState`] adds a global confidence level
//! τ tracked the same way and derives per-class thresholds from the ratio of
//! each class's p̄ entry to the largest one. Both smooth only the batches
//! they are shown — no full-dataset passes.

/// EMA of the batch-mean predicted class distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaProb {
    p_bar: Vec<f64>,
    momentum: f64,
}

impl EmaProb {
    /// Starts uniform: no class prior is assumed before any batch arrives.
    pub fn new(num_classes: usize, momentum: f64) -> EmaProb {
        assert!(num_classes > 0, "need at least one class");
        assert!(
            momentum > 0.0 && momentum < 1.0,
            "momentum must lie in (0, 1)"
        );
        EmaProb {
            p_bar: vec![1.0 / num_classes as f64; num_classes],
            momentum,
        }
    }

    pub fn p_bar(&self) -> &[f64] {
        &self.p_bar
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// p̄ ← m·p̄ + (1−m)·mean(rows). Empty batch leaves p̄ unchanged.
    pub fn update(&mut self, batch_probs: &[Vec<f64>]) {
        if batch_probs.is_empty() {
            return;
        }
        let n = batch_probs.len() as f64;
        let m = self.momentum;
        for (c, entry) in self.p_bar.iter_mut().enumerate() {
            let mean: f64 = batch_probs.iter().map(|row| row[c]).sum::<f64>() / n;
            *entry = m * *entry + (1.0 - m) * mean;
        }
    }
}

/// Global confidence τ plus the EMA distribution, with derived per-class
/// thresholds: τ(c) = p̄(c)/max p̄ · τ.
#[derive(Debug, Clone, PartialEq)]
pub struct SatState {
    tau_global: f64,
    ema: EmaProb,
}

impl SatState {
    /// τ starts at 1/C: permissive early so unlabeled data flows immediately.
    pub fn new(num_classes: usize, momentum: f64) -> SatState {
        SatState {
            tau_global: 1.0 / num_classes as f64,
            ema: EmaProb::new(num_classes, momentum),
        }
    }

    pub fn tau_global(&self) -> f64 {
        self.tau_global
    }

    pub fn p_bar(&self) -> &[f64] {
        self.ema.p_bar()
    }

    /// τ ← m·τ + (1−m)·mean(max-probability per row), and the same EMA
    /// update for p̄. Empty batch leaves both unchanged.
    pub fn update(&mut self, batch_probs: &[Vec<f64>]) {
        if batch_probs.is_empty() {
            return;
        }
        let n = batch_probs.len() as f64;
        let mean_max: f64 = batch_probs
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / n;
        let m = self.ema.momentum();
        self.tau_global = m * self.tau_global + (1.0 - m) * mean_max;
        self.ema.update(batch_probs);
    }

    /// Per-class thresholds, never stored: recomputed from current p̄ and τ.
    pub fn local_thresholds(&self) -> Vec<f64> {
        let max = self
            .p_bar()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        self.p_bar().iter().map(|&p| p / max * self.tau_global).collect()
    }
}
