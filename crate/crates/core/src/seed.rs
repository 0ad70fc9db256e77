//! Per-stage seeds derived from one run seed.

use sha2::{Digest, Sha256};

/// Seed for `stage`, independent of every other stage's seed.
pub fn derive_seed(run_seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
