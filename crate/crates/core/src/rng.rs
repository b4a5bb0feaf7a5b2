//! Seed derivation. Every random stream in the library is a ChaCha8 generator
//! whose seed is derived from one root seed, so results never depend on
//! thread scheduling or platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `tag`. Tags separate the uses of a
/// seed (chains, bootstrap replicates, evaluation runs) from each other.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = mix(seed);
    for b in tag.bytes() {
        h = mix(h ^ b as u64);
    }
    mix(h ^ mix(index))
}

/// Generator for chain `index` of root `seed`.
pub fn chain_rng(seed: u64, index: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, "chain", index))
}
