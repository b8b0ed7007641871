//! Named derivation of sub-seeds from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic step in the crate.
pub type Rng = ChaCha8Rng;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// `root ^ fnv1a64(name)`: sub-experiments get independent, reproducible streams.
pub fn derive(root: u64, name: &str) -> u64 {
    root ^ fnv1a64(name.as_bytes())
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(root: u64, name: &str) -> Rng {
    rng(derive(root, name))
}
