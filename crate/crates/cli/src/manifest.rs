use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written next to every command's outputs. `settings` is the fully
/// resolved configuration, enough to re-run the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<FileRecord>,
    pub restarts: Option<usize>,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn record(path: &Path, relative_to: Option<&Path>) -> Result<FileRecord> {
    let shown = match relative_to {
        Some(base) => path.strip_prefix(base).unwrap_or(path).to_path_buf(),
        None => path.to_path_buf(),
    };
    Ok(FileRecord {
        path: shown,
        sha256: sha256_file(path)?,
    })
}

/// Manifest path for an output: `<dir>/manifest.json` for directory outputs,
/// `<file>.manifest.json` otherwise.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

pub struct ManifestBuilder {
    pub command: &'static str,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub restarts: Option<usize>,
    pub notes: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, seed: u64, settings: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            seed,
            settings: serde_json::to_value(settings)?,
            inputs: vec![],
            outputs: vec![],
            restarts: None,
            notes: vec![],
        })
    }

    /// Hashes everything and writes the manifest to `path`.
    pub fn write(self, path: &Path) -> Result<RunManifest> {
        let base = path.parent().unwrap_or(Path::new(""));
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool: "dmdn".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            seed: self.seed,
            settings: self.settings,
            inputs: self.inputs.iter().map(|p| record(p, None)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| record(p, Some(base))).collect::<Result<_>>()?,
            restarts: self.restarts,
            notes: self.notes,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let m: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    anyhow::ensure!(
        m.manifest_version == MANIFEST_VERSION,
        "unsupported manifest version {} (expected {MANIFEST_VERSION})",
        m.manifest_version
    );
    Ok(m)
}
