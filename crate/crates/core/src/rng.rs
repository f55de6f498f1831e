//! Seeded random streams. ChaCha keeps results stable across platforms and crate versions.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng64;

pub fn seeded(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Independent stream `index` of `seed`, for per-item parallel work.
pub fn substream(seed: u64, index: u64) -> Rng64 {
    let mut r = Rng64::seed_from_u64(seed);
    r.set_stream(index);
    r
}
