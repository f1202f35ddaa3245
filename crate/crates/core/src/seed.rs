//! Seed derivation.
//!
//! Every stochastic step draws from its own ChaCha stream whose seed is a
//! pure function of the master seed and a path of integer tags. Results do
//! not depend on evaluation order or thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `tags` into `master`, order-sensitively.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(master: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, tags))
}

/// Stream tags, kept in one place so different call sites never collide.
pub mod tag {
    pub const INIT_GEN: u64 = 1;
    pub const INIT_CLF: u64 = 2;
    pub const RBBR_GEN: u64 = 3;
    pub const RBBR_CLF: u64 = 4;
    pub const REAL_SET: u64 = 5;
    pub const FAKE_SET: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const INIT_OPPONENT: u64 = 8;
    pub const GAN: u64 = 9;
}
