//! Deterministic seed derivation.
//!
//! Every stochastic task gets its own ChaCha8 stream whose 32-byte seed is
//! `sha256(master_seed_le || label || index_le)`. Streams are therefore
//! independent of scheduling order and of how many worker threads ran, and
//! stay stable across dependency upgrades (nothing here relies on the rand
//! crate's distribution internals).

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive the 32-byte seed for `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// An independent RNG stream for one labeled task.
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, label, index))
}

/// Uniform integer in `[0, n)` by rejection on the top of the 64-bit range;
/// unbiased and stable across rand versions.
pub fn uniform_below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    assert!(n > 0);
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rand_chacha::rand_core::RngCore::next_u64(rng);
        if v < zone {
            return v % n;
        }
    }
}

/// Uniform f64 in [0,1) with 53-bit resolution.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    let v = rand_chacha::rand_core::RngCore::next_u64(rng) >> 11;
    v as f64 * (1.0 / (1u64 << 53) as f64)
}
