//! Seeded RNG plumbing and small numeric helpers shared across detectors.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent seed for a sub-task (fold, tree, class, ...).
///
/// splitmix64 of the parent seed xored with the stream id; cheap and avoids
/// correlated streams when tasks run in parallel.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` distinct indices drawn uniformly from `0..n`, returned in ascending order.
pub fn sample_without_replacement(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: only the first k positions are needed.
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Shuffled copy of `0..n`.
pub fn shuffled_indices(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Score threshold placed at the `(1 - contamination)` quantile.
///
/// Values strictly above the returned threshold are flagged, so roughly a
/// `contamination` fraction of the given scores ends up flagged.
pub fn threshold_at_quantile(scores: &[f64], contamination: f64) -> f64 {
    debug_assert!(!scores.is_empty());
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((1.0 - contamination) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax_tie_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
