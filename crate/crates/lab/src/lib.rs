//! Experiment recipes, configuration, plot emission, and the acceptance
//! battery for the least-gradient DtN laboratory.

pub mod config;
pub mod plotdata;
pub mod recipes;
pub mod svg;
pub mod verify;

use std::path::Path;

use sha2::{Digest, Sha256};

use lsgrad_core::error::Result;

/// Hex SHA-256 over the directory contents (sorted relative paths and
/// bytes), skipping `hash.txt` itself. Reruns of a deterministic experiment
/// must reproduce it.
pub fn hash_dir(dir: &Path) -> Result<String> {
    let mut entries = Vec::new();
    collect_files(dir, dir, &mut entries)?;
    entries.sort();
    let mut hasher = Sha256::new();
    for rel in entries {
        if rel == "hash.txt" {
            continue;
        }
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update(std::fs::read(dir.join(&rel))?);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("path under root")
                .to_string_lossy()
                .replace('\\', "/");
            out.push(rel);
        }
    }
    Ok(())
}
