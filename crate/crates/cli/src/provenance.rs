//! Provenance headers written into every output file: a stable hash of the
//! resolved configuration plus the library version. No timestamps or paths,
//! so identical runs produce identical bytes.

use serde_json::{json, Value};

use crate::config::ScenarioConfig;

/// FNV-1a 64-bit hash; stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Hash of the resolved configuration's canonical JSON form, independent of
/// comments and formatting in the source file.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    format!("fnv1a64:{:016x}", fnv1a64(canonical.as_bytes()))
}

pub fn provenance_value(config: &ScenarioConfig) -> Value {
    json!({
        "config_hash": config_hash(config),
        "version": env!("CARGO_PKG_VERSION"),
        "tool": "drumhead",
    })
}

/// Single-line form for `#`-prefixed CSV headers.
pub fn provenance_line(config: &ScenarioConfig) -> String {
    serde_json::to_string(&provenance_value(config)).expect("provenance serializes")
}
