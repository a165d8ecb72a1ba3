//! Seeded inputs shared by the criterion benches.

use coarseflow::HermiteBatch;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 2004;

/// `4 m` uniform values in `[-1, 1)`.
pub fn random_segments(m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..4 * m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_batch(m: usize) -> HermiteBatch {
    HermiteBatch::from_flat(&random_segments(m)).expect("length is a multiple of 4")
}
