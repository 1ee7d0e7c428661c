//! Per-class bounded FIFO queues of pseudo-labeled examples.
//!
//! Each training iteration pushes freshly selected pseudo-labels into the
//! queue of their class and then draws a class-balanced (or inverse-prior
//! weighted) sample to train on. Queues evict oldest-first, so stale entries
//! age out as the model improves.

use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One pseudo-labeled example held by the bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub example_id: u64,
    pub features: Vec<f64>,
    pub pseudo_label: usize,
    pub confidence: f64,
    pub iteration_created: u64,
    /// Withheld ground truth when the source data had it; analysis only.
    pub hidden_true_label: Option<usize>,
}

/// C bounded FIFO queues plus the sampling RNG and starvation counters.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    queues: Vec<VecDeque<BankEntry>>,
    capacity: usize,
    rng: ChaCha8Rng,
    starved: Vec<u64>,
}

impl MemoryBank {
    pub fn new(num_classes: usize, capacity: usize, seed: u64) -> MemoryBank {
        assert!(num_classes > 0 && capacity > 0, "bank needs classes and capacity");
        MemoryBank {
            queues: (0..num_classes).map(|_| VecDeque::new()).collect(),
            capacity,
            rng: ChaCha8Rng::seed_from_u64(seed),
            starved: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.queues.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Current queue length per class.
    pub fn lens(&self) -> Vec<usize> {
        self.queues.iter().map(VecDeque::len).collect()
    }

    /// Cumulative count, per class, of sample calls that found the class's
    /// queue empty and so contributed nothing for it.
    pub fn starved(&self) -> &[u64] {
        &self.starved
    }

    /// Per-class fraction of held entries whose pseudo-label matches their
    /// hidden true label; `None` for empty queues or queues with no hidden
    /// labels at all.
    pub fn correctness(&self) -> Vec<Option<f64>> {
        self.queues
            .iter()
            .map(|q| {
                let with_truth: Vec<&BankEntry> =
                    q.iter().filter(|e| e.hidden_true_label.is_some()).collect();
                if with_truth.is_empty() {
                    return None;
                }
                let correct = with_truth
                    .iter()
                    .filter(|e| e.hidden_true_label == Some(e.pseudo_label))
                    .count();
                Some(correct as f64 / with_truth.len() as f64)
            })
            .collect()
    }

    /// Appends each entry to its class queue, evicting oldest entries when a
    /// queue would exceed capacity.
    pub fn push(&mut self, entries: Vec<BankEntry>) {
        for entry in entries {
            let q = &mut self.queues[entry.pseudo_label];
            q.push_back(entry);
            while q.len() > self.capacity {
                q.pop_front();
            }
        }
    }

    fn draw_from_class(&mut self, class: usize, n: usize, out: &mut Vec<BankEntry>) {
        let len = self.queues[class].len();
        if len == 0 {
            self.starved[class] += 1;
            return;
        }
        if len >= n {
            // Without replacement; indices come back in random order.
            let picks = sample_indices(&mut self.rng, len, n);
            for i in picks {
                out.push(self.queues[class][i].clone());
            }
        } else {
            for _ in 0..n {
                let i = self.rng.random_range(0..len);
                out.push(self.queues[class][i].clone());
            }
        }
    }

    /// Draws exactly `n_per_class` entries from every non-empty queue:
    /// without replacement when stocked, with replacement when under-stocked,
    /// nothing (plus a starvation count) when empty. Class-major order.
    pub fn equal_sample(&mut self, n_per_class: usize) -> Vec<BankEntry> {
        assert!(n_per_class > 0, "sample size must be positive");
        let mut out = Vec::with_capacity(n_per_class * self.queues.len());
        for class in 0..self.queues.len() {
            self.draw_from_class(class, n_per_class, &mut out);
        }
        out
    }

    /// Like [`equal_sample`](Self::equal_sample) but with per-class counts
    /// inversely proportional to the running class prior: target(c) =
    /// round(((1/C)/max(p̄(c), 1e-3)) · base_n), clamped to [1, capacity].
    pub fn adaptive_sample(&mut self, base_n: usize, p_bar: &[f64]) -> Vec<BankEntry> {
        assert!(base_n > 0, "sample size must be positive");
        assert_eq!(p_bar.len(), self.queues.len(), "p_bar length mismatch");
        let targets = adaptive_targets(base_n, p_bar, self.capacity);
        let mut out = Vec::new();
        for (class, &n) in targets.iter().enumerate() {
            self.draw_from_class(class, n, &mut out);
        }
        out
    }
}

/// The per-class draw counts used by adaptive sampling, exposed for
/// inspection: inverse-prior scaling with a 1e-3 floor on p̄, round half up,
/// clamp to [1, capacity].
pub fn adaptive_targets(base_n: usize, p_bar: &[f64], capacity: usize) -> Vec<usize> {
    let c = p_bar.len() as f64;
    p_bar
        .iter()
        .map(|&p| {
            let raw = (1.0 / c) / p.max(1e-3) * base_n as f64;
            (raw.round() as usize).clamp(1, capacity)
        })
        .collect()
}
