//! Per-run manifest: tool version, seed, config hash and the SHA-256 of every
//! stage input and output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: BTreeMap<String, StageEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&io::read_bytes(path)?))
}

impl Manifest {
    pub fn load_or_new(out: &Path, seed: u64, config_sha256: &str) -> Result<Self> {
        let path = out.join(FILE_NAME);
        let fresh = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_sha256: config_sha256.into(),
            stages: BTreeMap::new(),
        };
        if !path.exists() {
            return Ok(fresh);
        }
        let old: Manifest = serde_json::from_slice(&io::read_bytes(&path)?)?;
        // stage records from another configuration are stale
        if old.seed == seed && old.config_sha256 == config_sha256 && old.version == fresh.version {
            Ok(Manifest {
                stages: old.stages,
                ..fresh
            })
        } else {
            Ok(fresh)
        }
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        io::write_atomic(&out.join(FILE_NAME), text.as_bytes())
    }

    /// SHA-256 of every recorded output, keyed by `stage/name`.
    pub fn output_hashes(&self) -> BTreeMap<String, String> {
        self.stages
            .iter()
            .flat_map(|(s, e)| {
                e.outputs
                    .iter()
                    .map(move |(n, h)| (format!("{s}/{n}"), h.clone()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn stale_stages_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::load_or_new(dir.path(), 1, "h").unwrap();
        m.stages.insert("ingest".into(), StageEntry::default());
        m.save(dir.path()).unwrap();
        assert_eq!(
            Manifest::load_or_new(dir.path(), 1, "h")
                .unwrap()
                .stages
                .len(),
            1
        );
        assert!(Manifest::load_or_new(dir.path(), 2, "h")
            .unwrap()
            .stages
            .is_empty());
        assert!(Manifest::load_or_new(dir.path(), 1, "g")
            .unwrap()
            .stages
            .is_empty());
    }
}
