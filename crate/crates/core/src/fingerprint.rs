//! Content fingerprints used to stamp reports, checkpoints and splits.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Short form used in file names.
pub fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}

/// Hashes each part with a separator so that `["ab", "c"]` and `["a", "bc"]` differ.
pub fn combine<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}
