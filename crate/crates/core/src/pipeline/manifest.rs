//! Run-directory manifest: every artifact with its content hash (FNV-1a 64),
//! so identical runs can be compared file by file. `timings.json` is listed
//! without a hash: wall-clock is the one intentionally nondeterministic
//! output.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::PipelineError;

/// `bytes` and `hash` are absent for the wall-clock timings file, the one
/// artifact whose content is intentionally nondeterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ManifestEntry>,
}

pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

impl Manifest {
    pub fn load_or_default(dir: &Path) -> Manifest {
        std::fs::read_to_string(dir.join("manifest.json"))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    /// Record an artifact relative to the run directory, hashing its current
    /// content unless it is the timings file.
    pub fn record(&mut self, dir: &Path, rel_path: &str) -> Result<(), PipelineError> {
        let data = std::fs::read(dir.join(rel_path))
            .map_err(|e| PipelineError::io(&format!("hashing {rel_path}"), e))?;
        let entry = if rel_path == "timings.json" {
            ManifestEntry {
                bytes: None,
                hash: None,
            }
        } else {
            ManifestEntry {
                bytes: Some(data.len() as u64),
                hash: Some(format!("fnv1a64:{:016x}", fnv1a64(&data))),
            }
        };
        self.artifacts.insert(rel_path.to_string(), entry);
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")
            .map_err(|e| PipelineError::io("writing manifest", e))
    }
}
