use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub global: u64,
    pub split: Option<u64>,
    pub encoder: Option<u64>,
    pub head: Option<u64>,
    pub schedule: u64,
}

/// Written last into every run directory. Lists every other file there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub config: RunConfig,
    pub seeds: SeedProvenance,
    pub artifacts: Vec<ArtifactEntry>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Sole writer of a run directory; records every artifact it writes.
pub struct RunWriter {
    root: PathBuf,
    command: String,
    config: RunConfig,
    started_at: String,
    artifacts: Vec<ArtifactEntry>,
    metrics: BTreeMap<String, f64>,
    warnings: Vec<String>,
}

impl RunWriter {
    /// Creates `root`, which must not exist or be empty, and writes the
    /// resolved config. The stored config names its own directory as `.`
    /// so reruns into different directories produce identical files.
    pub fn create(root: &Path, command: &str, config: &RunConfig) -> Result<Self> {
        let config = &RunConfig {
            output_dir: PathBuf::from("."),
            ..config.clone()
        };
        if root.exists() {
            let occupied = fs::read_dir(root)
                .map_err(|e| Error::io(root, e))?
                .next()
                .is_some();
            if occupied {
                return Err(Error::Config(format!(
                    "output directory {} is not empty; choose a fresh one with --out",
                    root.display()
                )));
            }
        }
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let mut w = RunWriter {
            root: root.to_path_buf(),
            command: command.to_string(),
            config: config.clone(),
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            artifacts: Vec::new(),
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
        };
        w.write(CONFIG, config.to_json()?.as_bytes())?;
        Ok(w)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        if rel == MANIFEST || self.artifacts.iter().any(|a| a.path == rel) {
            return Err(Error::Aborted(format!("artifact {rel} written twice")));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record(rel, bytes);
        Ok(())
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.artifacts.push(ArtifactEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(rel, text.as_bytes())
    }

    /// Writes through a buffer-producing closure, e.g. a CSV exporter.
    pub fn write_with<F>(&mut self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    /// Registers files some other writer already placed under the root
    /// (e.g. a checkpoint directory).
    pub fn adopt(&mut self, rel: &str) -> Result<()> {
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.record(rel, &bytes);
        Ok(())
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        log::warn!("{m}");
        self.warnings.push(m);
    }

    pub fn finish(self, error: Option<&Error>) -> Result<RunManifest> {
        let c = &self.config;
        let manifest = RunManifest {
            command: self.command,
            status: if error.is_some() { RunStatus::Failed } else { RunStatus::Ok },
            error: error.map(|e| e.to_string()),
            started_at: self.started_at,
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            seeds: SeedProvenance {
                global: c.seed,
                split: c.data.split_seed,
                encoder: c.encoder.seed,
                head: c.training.head_seed,
                schedule: c.training.schedule.seed,
            },
            config: self.config,
            artifacts: self.artifacts,
            metrics: self.metrics,
            warnings: self.warnings,
        };
        let path = self.root.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Relative paths of every file under `root` except the manifest.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, root, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root");
                let rel = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                if rel != MANIFEST {
                    out.push(rel);
                }
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_exactly_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("run");
        let mut w = RunWriter::create(&root, "test", &RunConfig::default()).unwrap();
        w.write("a.csv", b"x,y\n").unwrap();
        w.write("sub/b.json", b"{}").unwrap();
        assert!(w.write("a.csv", b"again").is_err());
        let m = w.finish(None).unwrap();
        let mut listed: Vec<_> = m.artifacts.iter().map(|a| a.path.clone()).collect();
        listed.sort();
        assert_eq!(listed, list_files(&root).unwrap());
        assert_eq!(RunManifest::load(&root).unwrap(), m);
    }

    #[test]
    fn refuses_occupied_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("stale"), b"").unwrap();
        assert!(matches!(
            RunWriter::create(dir.path(), "t", &RunConfig::default()),
            Err(Error::Config(_))
        ));
    }
}
