//! Dataset ingestion, text featurization, synthetic corpus generation and
//! k-shot labeled/unlabeled splitting.
//!
//! A [`Dataset`] is immutable after construction and safe to share read-only
//! across concurrent runs. All operations here are pure functions of their
//! inputs and seeds.

mod featurize;
mod jsonl;
mod synthetic;

pub use featurize::featurize_text;
pub use jsonl::{load_jsonl, JsonlSchema};
pub use synthetic::{generate_synthetic, shift_class_means, SyntheticSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A single featurized input with an optional ground-truth class.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Stable identifier, unique within its dataset.
    pub id: u64,
    pub features: Vec<f64>,
    pub true_label: Option<usize>,
}

/// An ordered, immutable collection of examples sharing one feature space.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub dim: usize,
    /// Class-index -> human-readable label name, in vocabulary order.
    pub label_names: Vec<String>,
    pub examples: Vec<Example>,
}

impl Dataset {
    /// Builds a dataset, checking the structural invariants: uniform feature
    /// dimension, class indices below `num_classes`, unique ids.
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        dim: usize,
        label_names: Vec<String>,
        examples: Vec<Example>,
    ) -> Result<Self> {
        if num_classes == 0 || dim == 0 {
            return Err(Error::InvalidInput(
                "dataset needs at least one class and one feature dimension".into(),
            ));
        }
        if label_names.len() != num_classes {
            return Err(Error::InvalidInput(format!(
                "expected {} label names, got {}",
                num_classes,
                label_names.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(examples.len());
        for ex in &examples {
            if ex.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: ex.features.len(),
                });
            }
            if let Some(label) = ex.true_label {
                if label >= num_classes {
                    return Err(Error::InvalidInput(format!(
                        "example {} has label {} outside [0, {})",
                        ex.id, label, num_classes
                    )));
                }
            }
            if !seen.insert(ex.id) {
                return Err(Error::InvalidInput(format!("duplicate example id {}", ex.id)));
            }
        }
        Ok(Dataset {
            name: name.into(),
            num_classes,
            dim,
            label_names,
            examples,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Returns a copy with ids shifted by `offset`. Used when two datasets
    /// must coexist with disjoint id spaces (e.g. source/target domains).
    pub fn with_id_offset(&self, offset: u64) -> Dataset {
        let mut out = self.clone();
        for ex in &mut out.examples {
            ex.id += offset;
        }
        out
    }

    /// All fully-labeled examples as evaluation items.
    pub fn labeled_examples(&self) -> Vec<LabeledExample> {
        self.examples
            .iter()
            .filter_map(|ex| {
                ex.true_label.map(|label| LabeledExample {
                    id: ex.id,
                    features: ex.features.clone(),
                    label,
                })
            })
            .collect()
    }
}

/// How to carve a dataset into labeled/unlabeled/validation/test pools.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// k: exactly this many labeled training examples per class.
    pub labels_per_class: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if self.labels_per_class == 0 {
            return Err(Error::InvalidInput(
                "labels_per_class must be at least 1 (no supervised signal otherwise)".into(),
            ));
        }
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.test_fraction) || !ok(self.validation_fraction) {
            return Err(Error::InvalidInput(
                "test_fraction and validation_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.test_fraction + self.validation_fraction >= 1.0 {
            return Err(Error::InvalidInput(
                "test_fraction + validation_fraction must be below 1".into(),
            ));
        }
        Ok(())
    }
}

/// A training/evaluation item with its ground-truth class exposed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: usize,
}

/// A training item whose class is withheld from the training path.
///
/// The source label, when it existed, travels along but is only reachable
/// through [`UnlabeledExample::hidden_true_label`] so that oracle strategies
/// and quality diagnostics can use it without it leaking into ordinary
/// selection or loss code.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledExample {
    pub id: u64,
    pub features: Vec<f64>,
    hidden: Option<usize>,
}

impl UnlabeledExample {
    pub fn new(id: u64, features: Vec<f64>, hidden: Option<usize>) -> Self {
        UnlabeledExample { id, features, hidden }
    }

    /// Analysis-only accessor: the withheld ground-truth class, if the source
    /// data had one. Training code must not branch on this.
    pub fn hidden_true_label(&self) -> Option<usize> {
        self.hidden
    }
}

/// The four disjoint pools produced by [`split_kshot`].
#[derive(Debug, Clone)]
pub struct Split {
    pub labeled_train: Vec<LabeledExample>,
    pub unlabeled_train: Vec<UnlabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl Split {
    /// Ids of every example the training loop may touch.
    pub fn training_ids(&self) -> Vec<u64> {
        self.labeled_train
            .iter()
            .map(|e| e.id)
            .chain(self.unlabeled_train.iter().map(|e| e.id))
            .collect()
    }
}

/// Stratified k-shot split.
///
/// Per class: a test and validation slice is carved off first (rounded
/// per-class counts from the configured fractions), then exactly k of the remaining
/// examples become the labeled pool and the rest join the unlabeled pool with
/// their labels withheld. Source examples that never had a label always land
/// in the unlabeled pool. Deterministic per seed.
pub fn split_kshot(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let k = spec.labels_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Bucket indices per class; unlabeled source rows go straight through.
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    let mut unlabeled = Vec::new();
    for (idx, ex) in dataset.examples.iter().enumerate() {
        match ex.true_label {
            Some(c) => per_class[c].push(idx),
            None => unlabeled.push(UnlabeledExample::new(ex.id, ex.features.clone(), None)),
        }
    }

    let mut labeled_train = Vec::with_capacity(k * dataset.num_classes);
    let mut validation = Vec::new();
    let mut test = Vec::new();

    for (class, indices) in per_class.iter_mut().enumerate() {
        let n = indices.len();
        let n_test = (n as f64 * spec.test_fraction).round() as usize;
        let n_val = (n as f64 * spec.validation_fraction).round() as usize;
        let train_available = n.saturating_sub(n_test + n_val);
        if train_available < k {
            return Err(Error::ClassTooSmall {
                class,
                available: train_available,
                needed: k,
            });
        }
        indices.shuffle(&mut rng);
        let as_labeled = |idx: usize| {
            let ex = &dataset.examples[idx];
            LabeledExample {
                id: ex.id,
                features: ex.features.clone(),
                label: ex.true_label.expect("bucketed by label"),
            }
        };
        test.extend(indices[..n_test].iter().copied().map(as_labeled));
        validation.extend(indices[n_test..n_test + n_val].iter().copied().map(as_labeled));
        let train = &indices[n_test + n_val..];
        labeled_train.extend(train[..k].iter().copied().map(as_labeled));
        unlabeled.extend(train[k..].iter().map(|&idx| {
            let ex = &dataset.examples[idx];
            UnlabeledExample::new(ex.id, ex.features.clone(), ex.true_label)
        }));
    }

    Ok(Split {
        labeled_train,
        unlabeled_train: unlabeled,
        validation,
        test,
    })
}
