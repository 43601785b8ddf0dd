//! Run manifests: the resolved command line, input and output digests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Subcommand arguments after config merging.
    pub args: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: String,
    /// Parsed configuration with defaults filled in.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Collects what a subcommand read and wrote.
#[derive(Debug, Default)]
pub struct Recorder {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
}

impl Recorder {
    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn finish(
        self,
        subcommand: &str,
        args: &[String],
        config: serde_json::Value,
    ) -> Result<RunManifest, CliError> {
        Ok(RunManifest {
            tool: "manifold".into(),
            version: crate::version().into(),
            subcommand: subcommand.into(),
            args: args.to_vec(),
            cwd: std::env::current_dir()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            config,
            seeds: self.seeds,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
        })
    }
}

/// Checks recorded digests against the files on disk.
pub fn verify(what: &'static str, recorded: &[FileDigest]) -> Result<(), CliError> {
    for d in recorded {
        let found = sha256_file(Path::new(&d.path))?;
        if found != d.sha256 {
            return Err(CliError::DigestMismatch {
                what,
                path: d.path.clone(),
                expected: d.sha256.clone(),
                found,
            });
        }
    }
    Ok(())
}

/// Default manifest location next to an output file.
pub fn default_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
