use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Code, OrCode};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written last into every output directory. `config_digest` is the SHA-256
/// of the config file bytes; `seed` is the effective master seed after any
/// `--seed` override. Artifact paths are relative to the directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_digest: String,
    pub seed: u64,
    pub artifacts: BTreeMap<String, String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, config_digest: &str, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            config_path: config_path.display().to_string(),
            config_digest: config_digest.into(),
            seed,
            artifacts: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn add(&mut self, key: &str, file: &str) {
        self.artifacts.insert(key.into(), file.into());
    }

    /// Fails unless every listed artifact exists under `dir`.
    pub fn check(&self, dir: &Path) -> CliResult<()> {
        for (key, file) in &self.artifacts {
            if !dir.join(file).is_file() {
                return Err(crate::failure::Failure::data(format!(
                    "artifact {key} ({}) is missing",
                    dir.join(file).display()
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        self.check(dir)?;
        let text = serde_json::to_string_pretty(self).or_code(Code::Runtime)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n").or_code(Code::Runtime)
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let p = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&p)
            .or_code(Code::Data)
            .map_err(|f| f.context(format!("reading {}", p.display())))?;
        serde_json::from_str(&text)
            .or_code(Code::Data)
            .map_err(|f| f.context(format!("parsing {}", p.display())))
    }
}
