//! Stable seed derivation.
//!
//! One root seed governs a whole run. Every stage derives its own seed
//! from the root plus a path of string labels, so adding or reordering
//! stages never perturbs unrelated randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from a root seed and a label path.
pub fn derive_seed(root: u64, path: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    for part in path {
        h.update([0u8]);
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// RNG seeded from a derived seed.
pub fn rng_for(root: u64, path: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
