//! Deterministic random streams.
//!
//! All randomness flows through xoshiro256++ seeded by SplitMix64 expansion of
//! a 64-bit seed (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`). The
//! algorithm is fixed, so a seed gives the same stream on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use sha2::{Digest, Sha256};

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Derives an independent seed for a named stage from the master seed.
///
/// Each stage's seed depends only on `(master, stage)`, so adding stages
/// never shifts the randomness of existing ones.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
