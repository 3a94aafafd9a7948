//! Deterministic seed derivation.
//!
//! Every random choice in the pipeline draws from a generator seeded by
//! [`derive_seed`], so a single master seed reproduces a whole run no matter
//! how work is scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"bci-seed/v1";

/// Mixes `(master, purpose, index)` into a 64-bit seed with SHA-256.
///
/// The purpose string is length-prefixed so `("ab", ..)` and `("a", ..)`
/// never share an encoding. All integers are little-endian, making the
/// result identical on every platform.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master.to_le_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// Generator for a derived seed.
pub fn rng_for(master: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, index))
}
