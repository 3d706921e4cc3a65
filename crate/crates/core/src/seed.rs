//! Seed derivation.
//!
//! Every randomized step draws from its own ChaCha stream whose seed is a
//! pure function of the master seed and a few labels, so results never depend
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with an ordered list of labels.
pub fn derive(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Phase labels used with [`derive`].
pub mod phase {
    pub const ORDER: u64 = 1;
    pub const SELECTION: u64 = 2;
    pub const OPTIMIZER: u64 = 3;
    pub const CLASSIFIER: u64 = 4;
}
