use crate::config::RunConfig;
use crate::experiments::{run_experiment, ReportBundle};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub experiment: String,
    pub seeds: Vec<String>,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_for(cfg: &RunConfig, bundle: &ReportBundle) -> Manifest {
    Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.name().to_string(),
        seeds: cfg.seeds().iter().map(|s| format!("{s:#06x}")).collect(),
        config: cfg.clone(),
        files: bundle
            .artifacts
            .iter()
            .map(|a| FileEntry { name: a.name.clone(), sha256: sha256_hex(a.contents.as_bytes()) })
            .collect(),
    }
}

/// Writes every artifact and the manifest into `dir`.
pub fn emit_report(cfg: &RunConfig, bundle: &ReportBundle, dir: &Path) -> Result<Manifest> {
    if bundle.artifacts.is_empty() {
        bail!("{} produced no results", cfg.experiment.name());
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    for a in &bundle.artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let manifest = manifest_for(cfg, bundle);
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, toml::to_string(&manifest)?).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub manifest: Manifest,
    pub bundle: ReportBundle,
    /// Files whose hash differs, or that exist on only one side.
    pub mismatches: Vec<String>,
}

/// Re-runs the recorded configuration and compares output hashes.
pub fn replay(path: &Path) -> Result<ReplayOutcome> {
    let manifest = load_manifest(path)?;
    let bundle = run_experiment(&manifest.config)?;
    let fresh = manifest_for(&manifest.config, &bundle);
    let mut mismatches = Vec::new();
    for f in &manifest.files {
        match fresh.files.iter().find(|g| g.name == f.name) {
            Some(g) if g.sha256 == f.sha256 => {}
            Some(_) => mismatches.push(f.name.clone()),
            None => mismatches.push(format!("{} (not produced)", f.name)),
        }
    }
    for g in &fresh.files {
        if !manifest.files.iter().any(|f| f.name == g.name) {
            mismatches.push(format!("{} (not in manifest)", g.name));
        }
    }
    Ok(ReplayOutcome { manifest, bundle, mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn empty_bundle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::defaults(Experiment::Calibrate);
        assert!(emit_report(&cfg, &ReportBundle::default(), dir.path()).is_err());
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let cfg = RunConfig::defaults(Experiment::Calibrate);
        let bundle = run_experiment(&cfg).unwrap();
        let err = emit_report(&cfg, &bundle, &blocker.join("sub")).unwrap_err();
        assert!(format!("{err:#}").contains("sub"));
    }

    #[test]
    fn replay_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::defaults(Experiment::Calibrate);
        let bundle = run_experiment(&cfg).unwrap();
        emit_report(&cfg, &bundle, dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        assert!(replay(&path).unwrap().mismatches.is_empty());
        let mut m = load_manifest(&path).unwrap();
        m.files[0].sha256 = "0".repeat(64);
        std::fs::write(&path, toml::to_string(&m).unwrap()).unwrap();
        assert_eq!(replay(&path).unwrap().mismatches, vec![m.files[0].name.clone()]);
    }
}
