//! Hashed bag-of-words featurizer.
//!
//! Tokens are lowercased alphanumeric runs; each token is hashed into one of
//! `dim` buckets with a seeded FNV-1a and the bucket counts are L2-normalized.
//! The hash is implemented by hand (rather than `DefaultHasher`) so the
//! bucket assignment is bit-stable across platforms and toolchain versions.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Maps `text` to a unit-norm `dim`-dimensional bucket-count vector.
///
/// Text with no alphanumeric tokens maps to the zero vector (the one vector
/// that is not renormalized).
pub fn featurize_text(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim > 0, "featurizer needs at least one bucket");
    let mut counts = vec![0.0f64; dim];
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let token = token.to_lowercase();
        let bucket = (fnv1a_seeded(seed, token.as_bytes()) % dim as u64) as usize;
        counts[bucket] += 1.0;
    }
    let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut counts {
            *x /= norm;
        }
    }
    counts
}
