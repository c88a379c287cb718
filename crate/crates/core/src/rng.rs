//! Seed handling. Every random stream in the crate is a ChaCha8 generator so
//! runs are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SessionRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SessionRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counter-based split: one independent stream per `(seed, stream)` pair.
pub fn split(seed: u64, stream: u64) -> SessionRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The seed of session `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}
