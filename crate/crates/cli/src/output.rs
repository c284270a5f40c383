use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance stamped on every generated artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Meta {
    pub fn new<C: Serialize>(seed: Option<u64>, config: &C) -> Self {
        let bytes = serde_json::to_vec(config).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        Self { version: smaup::VERSION, seed, config_hash: hex::encode(&digest[..8]) }
    }

    /// `# smaup <version> seed=<seed> config=<hash>` header for CSV files.
    pub fn csv_comment(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# smaup {} seed={} config={}\n", self.version, seed, self.config_hash)
    }

    /// Serializes `value` as a JSON object with a `meta` member added.
    pub fn json<T: Serialize>(&self, value: &T) -> Result<String> {
        let mut tree = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut tree {
            map.insert("meta".into(), serde_json::to_value(self)?);
        }
        Ok(serde_json::to_string_pretty(&tree)? + "\n")
    }
}

/// Writes to `path`, or standard output when absent.
pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
