//! Output directory handling: atomic writes, content hashes, manifests.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WrittenFile {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Files written under one output directory during a run.
#[derive(Debug)]
pub struct OutputSet {
    root: PathBuf,
    files: Vec<WrittenFile>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl OutputSet {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(OutputSet { root, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[WrittenFile] {
        &self.files
    }

    /// Writes `bytes` at `rel` and records its hash. Returns `rel`.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> io::Result<String> {
        write_atomic(&self.root.join(rel), bytes)?;
        let entry = WrittenFile { path: rel.to_string(), bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(bytes)) };
        self.files.retain(|f| f.path != rel);
        self.files.push(entry);
        Ok(rel.to_string())
    }

    /// Renders with `f` into memory, then writes atomically.
    pub fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> io::Result<String> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> io::Result<String> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        buf.push(b'\n');
        self.write(rel, &buf)
    }

    /// Hash over the sorted `(path, sha256)` list of everything written.
    pub fn content_hash(&self) -> String {
        let mut entries: Vec<&WrittenFile> = self.files.iter().collect();
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let mut h = Sha256::new();
        for e in entries {
            h.update(e.path.as_bytes());
            h.update([0]);
            h.update(e.sha256.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Writes `manifest_<command>.json` with `config`, the file list and the content hash.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C) -> io::Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            config: &'a C,
            outputs: Vec<WrittenFile>,
            content_hash: String,
        }
        let mut outputs = self.files.clone();
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: "qra",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            content_hash: self.content_hash(),
            outputs,
        };
        let rel = format!("manifest_{command}.json");
        self.write_json(&rel, &manifest)?;
        Ok(self.root.join(rel))
    }
}

/// File-system friendly version of a sample label.
pub fn sanitize(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("sample{s}")
    } else {
        s
    }
}

/// `base`, or `base_2`, `base_3`, … if already in `used`.
pub fn unique_label(used: &[String], base: &str) -> String {
    let mut candidate = base.to_string();
    let mut k = 2;
    while used.contains(&candidate) {
        candidate = format!("{base}_{k}");
        k += 1;
    }
    candidate
}

/// Makes labels unique by appending `_2`, `_3`, … to repeats.
pub fn unique_labels(labels: &[String]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::with_capacity(labels.len());
    for l in labels {
        let label = unique_label(&seen, l);
        seen.push(label);
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path().join("o")).unwrap();
        out.write("a/b.txt", b"hello").unwrap();
        assert_eq!(std::fs::read(dir.path().join("o/a/b.txt")).unwrap(), b"hello");
        assert_eq!(out.files()[0].sha256, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
        let h1 = out.content_hash();
        out.write("a/b.txt", b"hello").unwrap();
        assert_eq!(out.files().len(), 1);
        assert_eq!(out.content_hash(), h1);
        let manifest = out.finish("test", &serde_json::json!({"seed": 1})).unwrap();
        let text = std::fs::read_to_string(manifest).unwrap();
        assert!(text.contains("\"content_hash\""));
        assert!(text.contains("\"seed\": 1"));
    }

    #[test]
    fn labels() {
        assert_eq!(sanitize("cue fixed/n6"), "cue_fixed_n6");
        assert_eq!(sanitize(""), "sample");
        assert_eq!(sanitize("..x"), "sample..x");
        let l = unique_labels(&["a".into(), "b".into(), "a".into(), "a".into()]);
        assert_eq!(l, ["a", "b", "a_2", "a_3"]);
    }
}
