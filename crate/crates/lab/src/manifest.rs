//! Run directories and manifests.
//!
//! Every CLI invocation writes its outputs into a fresh timestamped run
//! directory together with a manifest recording the fully resolved config,
//! the seed, and the produced files. Re-running with the manifest's config
//! reproduces the numerical outputs byte for byte; the manifest itself
//! carries wall-clock metadata and is not part of that guarantee.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Hex prefix of the SHA-256 of a value's canonical JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs serialize");
    let digest = Sha256::digest(&json);
    let mut out = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn begin<T: Serialize>(subcommand: &str, config: &T, seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config).expect("configs serialize"),
            config_hash: config_hash(config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now_rfc3339(),
            finished: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Stamp the end time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> io::Result<PathBuf> {
        self.finished = now_rfc3339();
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self)?)?;
        Ok(path)
    }
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Create `out_dir/<subcommand>-<utc timestamp>-<config hash>/`.
pub fn create_run_dir(out_dir: &Path, subcommand: &str, hash: &str) -> io::Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3f");
    let dir = out_dir.join(format!("{subcommand}-{stamp}-{hash}"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        #[derive(Serialize)]
        struct C {
            a: u32,
        }
        assert_eq!(config_hash(&C { a: 1 }), config_hash(&C { a: 1 }));
        assert_ne!(config_hash(&C { a: 1 }), config_hash(&C { a: 2 }));
        assert_eq!(config_hash(&C { a: 1 }).len(), 16);
    }

    #[test]
    fn manifest_lifecycle_writes_outputs_list() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::begin("predict", &serde_json::json!({"alpha": 0.5}), 7);
        m.record_output(&dir.path().join("predict.json"));
        let path = m.finish(dir.path()).unwrap();
        let parsed: RunManifest =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(parsed.subcommand, "predict");
        assert_eq!(parsed.outputs.len(), 1);
        assert!(!parsed.finished.is_empty());
    }
}
