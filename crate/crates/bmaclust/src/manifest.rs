//! Run manifests: what a command read, what it wrote (with content hashes),
//! and how long it took.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::hex_string;
use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to audit or re-run one command invocation. Timing
/// fields (`wall_clock_seconds`, `timings`) are the only parts expected to
/// differ between identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub inputs: Vec<String>,
    pub grid: Option<String>,
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_seconds: f64,
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(subcommand: &str, output_dir: &Path) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            grid: None,
            seeds: Vec::new(),
            output_dir: output_dir.display().to_string(),
            artifacts: Vec::new(),
            wall_clock_seconds: 0.0,
            timings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.display().to_string());
        self
    }

    /// Record an emitted file, hashing its current content.
    pub fn artifact(&mut self, p: &Path) -> Result<&mut Self> {
        let bytes = fs::read(p)?;
        self.artifacts.push(Artifact {
            path: p.display().to_string(),
            sha256: hex_string(&Sha256::digest(&bytes)),
        });
        Ok(self)
    }

    pub fn timing(&mut self, what: &str, seconds: f64) -> &mut Self {
        self.timings.insert(what.to_string(), seconds);
        self
    }

    /// Write `manifest.json` into the output directory; artifacts are
    /// sorted by path first so identical runs serialize identically.
    pub fn save(&mut self) -> Result<PathBuf> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let path = Path::new(&self.output_dir).join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

/// The manifest with its timing fields blanked, for byte-comparing two runs.
pub fn strip_timings(manifest_json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(manifest_json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("wall_clock_seconds".into(), serde_json::json!(0.0));
        obj.insert("timings".into(), serde_json::json!({}));
    }
    Ok(serde_json::to_string_pretty(&v)?)
}
