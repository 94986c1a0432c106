//! Seeded, portable random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] whose
//! seed is derived from a master seed and a stream index with SplitMix64
//! mixing. ChaCha8 output is specified bit-for-bit and independent of the
//! platform, so sampled data sets reproduce everywhere. Deriving a stream per
//! work unit (slice, restart, trial) makes results independent of evaluation
//! order and of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `stream` under `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ splitmix64(stream)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, stream: u64) -> Rng {
    rng_from_seed(derive_seed(seed, stream))
}

/// Stream tags keep unrelated consumers of one master seed apart.
pub(crate) mod tag {
    pub const FIT: u64 = 0x6669_7400;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const DATA: u64 = 0x6461_7461;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const TRAIN: u64 = 0x7472_6e00;
}
