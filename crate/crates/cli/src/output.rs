//! Run-scoped output directory with a digest inventory. The manifest is
//! always the last file written.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub rng_algorithm: String,
    /// `complete`, or `incomplete` when the command failed part-way.
    pub status: String,
    pub config: toml::Table,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Re-hashes every inventoried file and reports the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for entry in &self.files {
            let bytes = fs::read(dir.join(&entry.path))
                .with_context(|| format!("reading {}", entry.path))?;
            anyhow::ensure!(
                digest(&bytes) == entry.sha256 && bytes.len() as u64 == entry.bytes,
                "digest mismatch for {}",
                entry.path
            );
        }
        Ok(())
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        // a stale manifest from an earlier run would describe other files
        let stale = root.join(MANIFEST_NAME);
        if stale.exists() {
            fs::remove_file(&stale).with_context(|| format!("removing {}", stale.display()))?;
        }
        Ok(Self {
            root,
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Renders a file in memory, writes it, and records its digest.
    pub fn write<F>(&mut self, name: &str, render: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf).with_context(|| format!("rendering {name}"))?;
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = BufWriter::new(
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        file.write_all(&buf)?;
        file.flush()?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: digest(&buf),
            bytes: buf.len() as u64,
        });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(self, command: &str, config: toml::Table, complete: bool) -> Result<Manifest> {
        let manifest = Manifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            rng_algorithm: pinned_billiards::engine::RNG_ALGORITHM.to_string(),
            status: if complete { "complete" } else { "incomplete" }.to_string(),
            config,
            files: self.files,
        };
        let text = toml::to_string(&manifest).context("serialising manifest")?;
        fs::write(self.root.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}
