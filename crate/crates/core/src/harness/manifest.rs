//! Run manifests.
//!
//! `manifest_<command>.json` is written with status `running` before any
//! work and rewritten at the end with the file inventory and a summary. It
//! holds nothing time- or machine-dependent, so two clean runs of the same
//! config are byte-identical. Wall-clock timings go to
//! `timings_<command>.json` instead.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, write_atomic};
use crate::error::Result;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// `running`, `complete` or `partial`.
    pub status: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn path(out: &Path, command: &str) -> PathBuf {
        out.join(format!("manifest_{command}.json"))
    }

    /// Writes the opening manifest.
    pub fn begin(out: &Path, command: &str, config: serde_json::Value) -> Result<Self> {
        let m = RunManifest {
            schema: MANIFEST_SCHEMA,
            tool: "spikemei".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: "running".into(),
            config,
            files: Vec::new(),
            summary: serde_json::Value::Null,
        };
        m.write(out)?;
        Ok(m)
    }

    /// Records the files under `roots` (relative to `out`) and the summary,
    /// and rewrites the manifest.
    pub fn finish(&mut self, out: &Path, roots: &[&str], complete: bool, summary: serde_json::Value) -> Result<()> {
        self.files = inventory(out, roots)?;
        self.status = if complete { "complete" } else { "partial" }.into();
        self.summary = summary;
        self.write(out)
    }

    fn write(&self, out: &Path) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(self)?;
        text.push(b'\n');
        write_atomic(&Self::path(out, &self.command), &text)
    }

    pub fn read(out: &Path, command: &str) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(Self::path(out, command))?)?)
    }
}

/// Writes `timings_<command>.json`.
pub(crate) fn write_timings(out: &Path, command: &str, timings: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(timings)?;
    text.push(b'\n');
    write_atomic(&out.join(format!("timings_{command}.json")), &text)
}

/// Every regular file under the given roots, sorted by path. Temporary
/// files are skipped.
pub(crate) fn inventory(out: &Path, roots: &[&str]) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    for root in roots {
        let path = out.join(root);
        if path.is_file() {
            files.push(path);
        } else if path.is_dir() {
            walk(&path, &mut files)?;
        }
    }
    let mut entries = Vec::with_capacity(files.len());
    for f in files {
        if f.extension().is_some_and(|e| e == "tmp") {
            continue;
        }
        let bytes = std::fs::read(&f)?;
        let rel = f.strip_prefix(out).unwrap_or(&f);
        let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        entries.push(FileEntry { path, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    entries.dedup_by(|a, b| a.path == b.path);
    Ok(entries)
}

fn walk(dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let ty = entry.file_type()?;
        if ty.is_dir() {
            walk(&entry.path(), files)?;
        } else if ty.is_file() {
            files.push(entry.path());
        }
    }
    Ok(())
}
