//! Counter-based seeding.
//!
//! Every random draw in the crate comes from a generator seeded by
//! `derive_seed(master, stream, index)`, so the value of draw `index` never
//! depends on which thread produced it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named seed streams. Distinct streams never share derived seeds for the
/// same master seed and index.
pub mod stream {
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const DICTIONARY: u64 = 0x4449_4354;
    pub const TARGET_SIGN: u64 = 0x5349_474e;
    pub const RADEMACHER: u64 = 0x5241_4445;
    pub const GAUSSIAN: u64 = 0x4741_5553;
    pub const MULTIPLIER: u64 = 0x4d55_4c54;
    pub const ORACLE: u64 = 0x4f52_4143;
    pub const REPLICATION: u64 = 0x5245_504c;
    pub const CALIBRATION: u64 = 0x4341_4c49;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
