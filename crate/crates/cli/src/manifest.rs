use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tvspec_core::adaptive::EstimatorConfig;

use crate::VERSION;

#[derive(Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every output.
#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub container_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<EstimatorConfig>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_clock_seconds: f64,
    pub iteration_timings: Vec<f64>,
    #[serde(skip)]
    start: Option<Instant>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let digest = Sha256::digest(fs::read(path)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn record(role: &str, path: &Path) -> anyhow::Result<FileRecord> {
    let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    Ok(FileRecord { role: role.into(), path: abs.display().to_string(), sha256: sha256_file(path)? })
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            version: VERSION.into(),
            container_version: tvspec_core::CONTAINER_VERSION.into(),
            seed: None,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            iteration_timings: Vec::new(),
            start: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(record(role, path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(record(role, path)?);
        Ok(())
    }

    /// Writes the manifest to `path`, stamping the elapsed time.
    pub fn write(mut self, path: &Path) -> anyhow::Result<()> {
        if let Some(s) = self.start {
            self.wall_clock_seconds = s.elapsed().as_secs_f64();
        }
        fs::write(path, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }

    /// Writes `<file>.manifest.json` beside a single output file.
    pub fn write_beside(self, output: &Path) -> anyhow::Result<()> {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        let path = output.with_file_name(name);
        self.write(&path)
    }
}

/// Reads the `raw` input path recorded by `estimate` in a result directory.
pub fn recorded_input(dir: &Path, role: &str) -> anyhow::Result<(PathBuf, String)> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let inputs = v["inputs"].as_array().ok_or_else(|| anyhow::anyhow!("manifest has no inputs"))?;
    for i in inputs {
        if i["role"] == role {
            let path = i["path"].as_str().unwrap_or_default();
            let hash = i["sha256"].as_str().unwrap_or_default();
            return Ok((PathBuf::from(path), hash.to_string()));
        }
    }
    anyhow::bail!("manifest in {} records no `{role}` input", dir.display())
}
