//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`) seeded
//! through `SeedableRng::seed_from_u64`. Batch member `i` of a run with base
//! seed `s` uses seed `s + i` (wrapping), so any single path can be replayed
//! on its own and parallel batches are reproducible regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Inverse-CDF draw from unnormalized nonnegative weights.
///
/// Rounding can leave the uniform draw past the final cumulative sum; the
/// last index with positive weight is returned in that case.
pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Same as [`sample_index`] for sparse `(index, weight)` entries.
pub(crate) fn sample_sparse<R: Rng + ?Sized>(rng: &mut R, entries: &[(usize, f64)]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = entries.first().map(|e| e.0).unwrap_or(0);
    for &(i, w) in entries {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
