use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use spectra_core::datacube::HSIC_VERSION;
use spectra_core::reduction::{PCAM_VERSION, RANKING_VERSION};
use spectra_core::scorer::WEIGHTS_VERSION;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::stages::stage_seeds;

/// Files whose bytes depend on wall-clock time and are never hashed.
pub const TIMING_FILES: [&str; 4] = ["bench.csv", "bench.json", "speedup.csv", "summary.csv"];

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    Ok(sha256_bytes(&fs::read(path).map_err(CliError::io(path))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub formats: BTreeMap<String, u64>,
    pub seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub config: Value,
    /// Path relative to the manifest's directory, then SHA-256 hex.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig) -> Self {
        let formats = BTreeMap::from([
            ("hsic".to_string(), u64::from(HSIC_VERSION)),
            ("pcam".to_string(), u64::from(PCAM_VERSION)),
            ("ranking".to_string(), u64::from(RANKING_VERSION)),
            ("weights".to_string(), u64::from(WEIGHTS_VERSION)),
        ]);
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            formats,
            seed: cfg.seed,
            stage_seeds: stage_seeds(cfg.seed),
            config: portable_config(cfg),
            artifacts: BTreeMap::new(),
        }
    }

    /// Hashes every regular file under `dir` except manifests and timing
    /// files, visiting entries in sorted order.
    pub fn hash_tree(&mut self, dir: &Path) -> Result<(), CliError> {
        for path in walk(dir)? {
            let rel = path.strip_prefix(dir).expect("walk stays under dir");
            let name = rel.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name == "manifest.json" || TIMING_FILES.contains(&name) {
                continue;
            }
            let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            self.artifacts.insert(key, sha256_file(&path)?);
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises") + "\n";
        fs::write(path, text).map_err(CliError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::BadArtifact { path: path.to_path_buf(), reason: e.to_string() })
    }
}

// The output directory does not affect any artifact byte.
fn portable_config(cfg: &RunConfig) -> Value {
    let mut v = cfg.to_flat_json();
    if let Value::Object(map) = &mut v {
        map.remove("out");
    }
    v
}

fn walk(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> =
        fs::read_dir(dir).map_err(CliError::io(dir))?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(CliError::io(dir))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else if p.is_file() {
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn tree_skips_timing_and_manifests() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("fi")).unwrap();
        fs::write(dir.path().join("fi/weights.bin"), b"w").unwrap();
        fs::write(dir.path().join("fi/bench.csv"), b"t").unwrap();
        fs::write(dir.path().join("fi/manifest.json"), b"{}").unwrap();
        fs::write(dir.path().join("a.txt"), b"a").unwrap();
        let mut m = Manifest::new(&RunConfig::default());
        m.hash_tree(dir.path()).unwrap();
        assert_eq!(m.artifacts.keys().collect::<Vec<_>>(), ["a.txt", "fi/weights.bin"]);
        m.write(&dir.path().join("m.json")).unwrap();
        assert_eq!(Manifest::read(&dir.path().join("m.json")).unwrap(), m);
    }
}
