//! Artifacts are staged in memory and written only once a command succeeds.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{unit_table, RunConfig};

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    files: Vec<FileEntry<'a>>,
    units: std::collections::BTreeMap<&'static str, &'static str>,
    config: &'a RunConfig,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut v = serde_json::to_vec_pretty(value).expect("report serialises");
        v.push(b'\n');
        self.add(name, v);
    }

    /// Buffers whatever `f` writes under `name`.
    pub fn with<F>(&mut self, name: impl Into<String>, f: F)
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).expect("writing to memory");
        self.add(name, buf);
    }

    /// Writes every artifact and then `manifest.json` via temp file + rename.
    pub fn commit(self, dir: &Path, command: &str, config: &RunConfig) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files: Vec<FileEntry> = self
            .files
            .iter()
            .map(|(name, bytes)| FileEntry {
                name,
                bytes: bytes.len(),
                sha256: hex_digest(bytes),
            })
            .collect();
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            files,
            units: unit_table(),
            config,
        };
        let mut m = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
        m.push(b'\n');
        let mut written = Vec::new();
        for (name, bytes) in self.files.iter().map(|(n, b)| (n.as_str(), b)).chain([("manifest.json", &m)]) {
            written.push(write_atomic(dir, name, bytes)?);
        }
        Ok(written)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}
