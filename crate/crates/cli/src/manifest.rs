//! Run manifests: what a command read, what it wrote, and content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<OutputEntry>,
    pub wall_time_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, config: String) -> Self {
        Self {
            command: command.into(),
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<String>) {
        self.inputs.insert(key.into(), value.into());
    }

    /// Hashes every listed file under `dir` and records it, sorted by path.
    pub fn record_outputs(&mut self, dir: &Path, files: &[String]) -> Result<()> {
        let mut files = files.to_vec();
        files.sort();
        files.dedup();
        for rel in files {
            let sha256 = sha256_file(&dir.join(&rel))?;
            self.outputs.push(OutputEntry { path: rel, sha256 });
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(FILE_NAME), text + "\n")
            .with_context(|| format!("writing manifest in {}", dir.display()))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE_NAME);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks that every output exists and still matches its hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for o in &self.outputs {
            let actual = sha256_file(&dir.join(&o.path))?;
            if actual != o.sha256 {
                bail!("{}: hash mismatch", o.path);
            }
        }
        Ok(())
    }
}
