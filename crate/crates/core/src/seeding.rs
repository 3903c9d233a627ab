//! Stable per-unit seed derivation.

use sha2::{Digest, Sha256};

/// Derives a 64-bit seed from a master seed and a label. The mapping depends
/// only on its inputs, so adding or removing other labels never changes the
/// seed of an existing one.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
