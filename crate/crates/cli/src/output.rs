//! Atomic file output and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes `path` through a temporary file in the same directory, renamed
/// into place only once `fill` succeeds.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    created_utc: String,
    config: FileDigest,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Files read and written by one command.
#[derive(Debug, Default)]
pub struct RunLog {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunLog {
    pub fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|q| q == p) {
            self.inputs.push(p.to_path_buf());
        }
    }

    pub fn output(&mut self, p: &Path) {
        if !self.outputs.iter().any(|q| q == p) {
            self.outputs.push(p.to_path_buf());
        }
    }

    /// Inputs that this run also produced are listed only as outputs.
    pub fn write_manifest(&self, path: &Path, command: &str, config_path: &Path, config_raw: &[u8]) -> Result<()> {
        let digest = |p: &PathBuf| -> Result<FileDigest> {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        };
        let manifest = Manifest {
            tool: "earthtruth",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config: FileDigest {
                path: config_path.display().to_string(),
                sha256: hex::encode(Sha256::digest(config_raw)),
            },
            inputs: self
                .inputs
                .iter()
                .filter(|p| !self.outputs.contains(p))
                .map(digest)
                .collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(digest).collect::<Result<_>>()?,
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        write_atomic(path, |w| writeln!(w, "{json}"))
    }
}
