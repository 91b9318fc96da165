//! `MANIFEST` in the output directory: one line per produced file,
//! `sha256<TAB>relative path<TAB>command`, in the order the files were written.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "MANIFEST";
pub const RUN_CONFIG: &str = "run_config.toml";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub sha256: String,
    pub path: String,
    pub command: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

pub fn read(dir: &Path) -> Result<Vec<Entry>, CliError> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut parts = l.splitn(3, '\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(h), Some(p), Some(c)) => Ok(Entry {
                    sha256: h.into(),
                    path: p.into(),
                    command: c.into(),
                }),
                _ => Err(CliError::Io(format!("malformed manifest line: {l}"))),
            }
        })
        .collect()
}

/// Replaces the entries of `files` (paths relative to `dir`) with fresh hashes.
pub fn record(dir: &Path, command: &str, files: &[String]) -> Result<(), CliError> {
    let mut entries: Vec<Entry> = read(dir)?.into_iter().filter(|e| !files.contains(&e.path)).collect();
    for f in files {
        entries.push(Entry {
            sha256: hash_file(&dir.join(f))?,
            path: f.clone(),
            command: command.into(),
        });
    }
    let text: String = entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.sha256, e.path, e.command))
        .collect();
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_replaces_entries() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "1").unwrap();
        fs::write(dir.path().join("b.csv"), "2").unwrap();
        record(dir.path(), "simulate", &["a.csv".into(), "b.csv".into()]).unwrap();
        fs::write(dir.path().join("a.csv"), "3").unwrap();
        record(dir.path(), "estimate", &["a.csv".into()]).unwrap();
        let m = read(dir.path()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].path, "b.csv");
        assert_eq!(m[1].command, "estimate");
        assert_eq!(m[1].sha256, sha256_hex(b"3"));
    }
}
