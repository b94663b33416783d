//! Per-command manifests and hash lineage between on-disk artifacts.
//!
//! Every command writes `<command>.manifest.json` next to its outputs. A
//! manifest records the config hash, the seed, and SHA-256 digests of each
//! input and output. Before a command reads an artifact produced by an
//! earlier command, the artifact's digest is checked against the producer's
//! manifest, and the producer's own inputs are checked the same way, so a
//! stale file anywhere upstream is caught.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use super::config::sha256_hex;
use crate::corpus::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Input key to digest. Artifact inputs are keyed by file name inside
    /// the output directory; external inputs by the path in the config.
    pub inputs: BTreeMap<String, String>,
    /// Output file name to digest.
    pub outputs: BTreeMap<String, String>,
    /// Upstream command that produced each artifact input.
    #[serde(default)]
    pub upstream: BTreeMap<String, String>,
    /// Effective command settings after config and flag overrides.
    #[serde(default)]
    pub settings: serde_json::Value,
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("{command}.manifest.json"))
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl Manifest {
    pub fn new(command: &str, config_sha256: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            upstream: BTreeMap::new(),
            settings: serde_json::Value::Null,
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
    }

    pub fn add_input(&mut self, key: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(key.to_string(), file_sha256(path)?);
        Ok(())
    }

    /// Records an input produced by `producer` in the same output directory.
    pub fn add_artifact_input(&mut self, out_dir: &Path, name: &str, producer: &str) -> anyhow::Result<()> {
        self.add_input(name, &out_dir.join(name))?;
        self.upstream.insert(name.to_string(), producer.to_string());
        Ok(())
    }

    pub fn add_output(&mut self, out_dir: &Path, name: &str) -> anyhow::Result<()> {
        self.outputs.insert(name.to_string(), file_sha256(&out_dir.join(name))?);
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&manifest_path(out_dir, &self.command), text.as_bytes())?;
        Ok(())
    }
}

/// Checks that `out_dir/name` is exactly what `producer` last wrote, and
/// recursively that the producer's own inputs are unchanged.
///
/// `externals` maps external input keys to their current paths. A config
/// hash that differs from `config_sha256` only logs a warning: an edited
/// config may not touch anything the artifact depends on, whereas changed
/// bytes always matter.
pub fn check_lineage(
    out_dir: &Path,
    name: &str,
    producer: &str,
    externals: &BTreeMap<String, PathBuf>,
    config_sha256: &str,
) -> anyhow::Result<()> {
    let mut visited = Vec::new();
    check_inner(out_dir, name, producer, externals, config_sha256, &mut visited)
}

fn check_inner(
    out_dir: &Path,
    name: &str,
    producer: &str,
    externals: &BTreeMap<String, PathBuf>,
    config_sha256: &str,
    visited: &mut Vec<String>,
) -> anyhow::Result<()> {
    let artifact = out_dir.join(name);
    if !artifact.is_file() {
        bail!("missing input {}; run `{producer}` first", artifact.display());
    }
    let mpath = manifest_path(out_dir, producer);
    if !mpath.is_file() {
        bail!(
            "{} has no manifest {}; rerun `{producer}`",
            artifact.display(),
            mpath.display()
        );
    }
    let m = Manifest::load(&mpath)?;
    let Some(recorded) = m.outputs.get(name) else {
        bail!(
            "{} does not list {name} as an output; rerun `{producer}`",
            mpath.display()
        );
    };
    if *recorded != file_sha256(&artifact)? {
        bail!(
            "{} changed since `{producer}` wrote it (hash mismatch); rerun `{producer}`",
            artifact.display()
        );
    }
    if visited.iter().any(|v| v == producer) {
        return Ok(());
    }
    visited.push(producer.to_string());
    if m.config_sha256 != config_sha256 {
        log::warn!("`{producer}` ran with a different config than the current one");
    }
    for (key, digest) in &m.inputs {
        if let Some(up) = m.upstream.get(key) {
            check_inner(out_dir, key, up, externals, config_sha256, visited)?;
            // the upstream check above compares against the upstream
            // manifest; also require the bytes this producer consumed
            if *digest != file_sha256(&out_dir.join(key))? {
                bail!("{key} changed after `{producer}` consumed it; rerun `{producer}`");
            }
        } else if let Some(path) = externals.get(key) {
            if !path.is_file() {
                bail!("input {} of `{producer}` no longer exists", path.display());
            }
            if *digest != file_sha256(path)? {
                bail!(
                    "input {} changed since `{producer}` ran (hash mismatch); rerun `{producer}`",
                    path.display()
                );
            }
        } else {
            log::warn!("`{producer}` input {key} is not in the current config; cannot verify it");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        std::fs::write(dir.join(name), text).unwrap();
    }

    fn setup() -> (tempfile::TempDir, BTreeMap<String, PathBuf>) {
        let d = tempfile::tempdir().unwrap();
        let ext = d.path().join("raw.txt");
        std::fs::write(&ext, "raw").unwrap();
        write(d.path(), "a.txt", "A");
        let mut m = Manifest::new("first", "cfg", 1);
        m.add_input("raw.txt", &ext).unwrap();
        m.add_output(d.path(), "a.txt").unwrap();
        m.save(d.path()).unwrap();
        write(d.path(), "b.txt", "B");
        let mut m = Manifest::new("second", "cfg", 1);
        m.add_artifact_input(d.path(), "a.txt", "first").unwrap();
        m.add_output(d.path(), "b.txt").unwrap();
        m.save(d.path()).unwrap();
        let externals = BTreeMap::from([("raw.txt".to_string(), ext)]);
        (d, externals)
    }

    #[test]
    fn clean_chain_passes() {
        let (d, ext) = setup();
        check_lineage(d.path(), "b.txt", "second", &ext, "cfg").unwrap();
        // a different config hash is only a warning
        check_lineage(d.path(), "b.txt", "second", &ext, "other").unwrap();
    }

    #[test]
    fn stale_artifacts_are_detected() {
        let (d, ext) = setup();
        write(d.path(), "a.txt", "A2");
        let err = check_lineage(d.path(), "b.txt", "second", &ext, "cfg").unwrap_err();
        assert!(err.to_string().contains("rerun `first`"), "{err}");

        let (d, ext) = setup();
        std::fs::write(&ext["raw.txt"], "changed").unwrap();
        let err = check_lineage(d.path(), "b.txt", "second", &ext, "cfg").unwrap_err();
        assert!(err.to_string().contains("rerun `first`"), "{err}");

        let (d, ext) = setup();
        write(d.path(), "b.txt", "B2");
        let err = check_lineage(d.path(), "b.txt", "second", &ext, "cfg").unwrap_err();
        assert!(err.to_string().contains("rerun `second`"), "{err}");
    }

    #[test]
    fn missing_artifact_names_producer() {
        let d = tempfile::tempdir().unwrap();
        let err = check_lineage(d.path(), "x.txt", "maker", &BTreeMap::new(), "cfg").unwrap_err();
        assert!(err.to_string().contains("run `maker` first"), "{err}");
    }
}
