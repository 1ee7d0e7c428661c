//! Gaussian-blob corpus generation with controllable per-class difficulty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

use super::{Dataset, Example};

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// Examples drawn per class (the corpus is balanced by construction).
    pub per_class_count: usize,
    /// Euclidean distance between any two class means when `dim >= num_classes`.
    pub class_mean_separation: f64,
    /// Isotropic noise scale per class; larger values make a class harder.
    pub per_class_noise_scale: Vec<f64>,
    pub seed: u64,
}

fn sample_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Class means for the blob layout.
///
/// With `dim >= num_classes` each mean sits at `(separation / sqrt(2))` along
/// its own axis, so every pair of means is exactly `separation` apart. In the
/// degenerate `dim < num_classes` case means fall back to random unit
/// directions scaled by `separation` (pairwise distances then vary).
pub(crate) fn class_means(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    if spec.dim >= spec.num_classes {
        (0..spec.num_classes)
            .map(|c| {
                let mut mean = vec![0.0; spec.dim];
                mean[c] = spec.class_mean_separation / 2.0f64.sqrt();
                mean
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6d65_616e);
        (0..spec.num_classes)
            .map(|_| {
                sample_unit_vector(&mut rng, spec.dim)
                    .into_iter()
                    .map(|x| x * spec.class_mean_separation)
                    .collect()
            })
            .collect()
    }
}

/// Draws a balanced Gaussian-blob dataset: `per_class_count` points per class
/// at the layout from [`class_means`], each perturbed by
/// `per_class_noise_scale[c] * N(0, I)`. Deterministic per seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.num_classes == 0 || spec.dim == 0 || spec.per_class_count == 0 {
        return Err(Error::InvalidInput(
            "synthetic spec needs positive classes, dim and per-class count".into(),
        ));
    }
    if spec.per_class_noise_scale.len() != spec.num_classes {
        return Err(Error::InvalidInput(format!(
            "expected {} noise scales, got {}",
            spec.num_classes,
            spec.per_class_noise_scale.len()
        )));
    }
    if spec.class_mean_separation <= 0.0 || spec.per_class_noise_scale.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidInput(
            "separation and noise scales must be positive".into(),
        ));
    }

    let means = class_means(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::with_capacity(spec.num_classes * spec.per_class_count);
    let mut id = 0u64;
    for c in 0..spec.num_classes {
        let scale = spec.per_class_noise_scale[c];
        for _ in 0..spec.per_class_count {
            let features: Vec<f64> = means[c]
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + scale * z
                })
                .collect();
            examples.push(Example {
                id,
                features,
                true_label: Some(c),
            });
            id += 1;
        }
    }
    let label_names = (0..spec.num_classes).map(|c| format!("class_{c}")).collect();
    Dataset::new(
        format!("synthetic_c{}_d{}", spec.num_classes, spec.dim),
        spec.num_classes,
        spec.dim,
        label_names,
        examples,
    )
}

/// Returns a copy of `dataset` with every class mean translated by an
/// independent random direction of length `shift`. Labels and ids are kept;
/// geometry moves. Used to manufacture a domain-shifted variant of a corpus.
pub fn shift_class_means(dataset: &Dataset, shift: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<Vec<f64>> = (0..dataset.num_classes)
        .map(|_| {
            sample_unit_vector(&mut rng, dataset.dim)
                .into_iter()
                .map(|x| x * shift)
                .collect()
        })
        .collect();
    let mut out = dataset.clone();
    out.name = format!("{}_shifted", dataset.name);
    for ex in &mut out.examples {
        if let Some(c) = ex.true_label {
            for (x, o) in ex.features.iter_mut().zip(&offsets[c]) {
                *x += o;
            }
        }
    }
    out
}
