//! Provenance stamps for output files.
//!
//! Every report artifact (CSV, SVG, JSON, embedding binary) carries the
//! toolkit version, the global seed, and a digest of the resolved run
//! configuration so identical inputs are recognizable as identical runs.

use std::fmt;

/// Toolkit version baked into artifact headers.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance header written at the top of every report artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStamp {
    pub version: String,
    pub seed: u64,
    pub config_digest: String,
}

impl RunStamp {
    pub fn new(seed: u64, config_digest: impl Into<String>) -> Self {
        Self {
            version: TOOLKIT_VERSION.to_string(),
            seed,
            config_digest: config_digest.into(),
        }
    }

    /// Stamp used by tests and ad-hoc library callers.
    pub fn ad_hoc(seed: u64) -> Self {
        Self::new(seed, "adhoc")
    }

    /// The `#`-comment line placed at the top of CSV artifacts.
    pub fn comment_line(&self) -> String {
        format!("# {self}")
    }
}

impl fmt::Display for RunStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "prodiv {} seed={} config={}",
            self.version, self.seed, self.config_digest
        )
    }
}

/// 64-bit FNV-1a over a canonical config rendering. Not cryptographic; it
/// only has to make "same config" visible across runs.
pub fn digest(text: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Derive a per-stage seed from the global seed, so stages can rerun
/// independently yet reproducibly.
pub fn derive_seed(global_seed: u64, label: &str) -> u64 {
    let label_hash = u64::from_str_radix(&digest(label), 16).expect("digest is hex");
    splitmix64(global_seed ^ label_hash)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
