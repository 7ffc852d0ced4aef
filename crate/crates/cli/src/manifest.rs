//! Output-directory writer that records a sha256 content hash for every
//! emitted file and finishes by writing `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mgu_core::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

/// An output directory; every write is hashed and listed in the manifest.
pub struct OutDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `rel` under the root and records its hash.
    pub fn write(&mut self, rel: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents);
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            bytes: contents.len() as u64,
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(path)
    }

    /// Writes `manifest.json` listing every file emitted so far.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest { entries: self.entries };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_write_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write("a.txt", b"hello").unwrap();
        out.write("sub/b.json", b"{}").unwrap();
        let path = out.finish().unwrap();
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(manifest.entries.len(), 2);
        assert_eq!(manifest.entries[0].path, "a.txt");
        assert_eq!(
            manifest.entries[0].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        assert_eq!(manifest.entries[1].bytes, 2);
        assert!(dir.path().join("sub/b.json").exists());
    }
}
