//! `manifest.json`: every output file with its SHA-256, checked against the
//! previous manifest in the same directory.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub master_seed: u64,
    pub files: Vec<Entry>,
}

/// What a re-run found when comparing with the previous manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verification {
    FirstRun,
    /// Previous manifest was for another command or seed.
    DifferentRun,
    Unchanged(usize),
    Changed(Vec<String>),
}

impl Manifest {
    pub fn new(command: &str, master_seed: u64, files: &[(String, Vec<u8>)]) -> Self {
        let mut files: Vec<Entry> = files
            .iter()
            .map(|(path, data)| Entry {
                path: path.clone(),
                sha256: hex::encode(Sha256::digest(data)),
                bytes: data.len() as u64,
            })
            .collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Manifest {
            command: command.into(),
            master_seed,
            files,
        }
    }

    /// Compares with the manifest already in `dir`, if any.
    pub fn verify_against(&self, dir: &Path) -> Verification {
        let Ok(text) = std::fs::read_to_string(dir.join(FILE_NAME)) else {
            return Verification::FirstRun;
        };
        let Ok(old) = serde_json::from_str::<Manifest>(&text) else {
            return Verification::DifferentRun;
        };
        if old.command != self.command || old.master_seed != self.master_seed {
            return Verification::DifferentRun;
        }
        let changed: Vec<String> = self
            .files
            .iter()
            .filter(|f| !old.files.iter().any(|o| o.path == f.path && o.sha256 == f.sha256))
            .map(|f| f.path.clone())
            .collect();
        if changed.is_empty() {
            Verification::Unchanged(self.files.len())
        } else {
            Verification::Changed(changed)
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        crate::write_file(&dir.join(FILE_NAME), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_are_sha256_of_contents() {
        let m = Manifest::new("nu", 1, &[("b.csv".into(), b"abc".to_vec()), ("a.csv".into(), vec![])]);
        assert_eq!(m.files[0].path, "a.csv");
        assert_eq!(m.files[0].sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(m.files[1].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(m.files[1].bytes, 3);
    }

    #[test]
    fn rerun_verification() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new("nu", 1, &[("a.csv".into(), b"x".to_vec())]);
        assert_eq!(m.verify_against(dir.path()), Verification::FirstRun);
        m.write(dir.path()).unwrap();
        assert_eq!(m.verify_against(dir.path()), Verification::Unchanged(1));
        let m2 = Manifest::new("nu", 1, &[("a.csv".into(), b"y".to_vec())]);
        assert_eq!(m2.verify_against(dir.path()), Verification::Changed(vec!["a.csv".into()]));
        let m3 = Manifest::new("nu", 2, &[("a.csv".into(), b"y".to_vec())]);
        assert_eq!(m3.verify_against(dir.path()), Verification::DifferentRun);
    }
}
