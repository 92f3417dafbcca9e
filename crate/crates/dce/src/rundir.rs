//! Layout of a run directory.

use std::path::{Path, PathBuf};

pub const CONFIG_FILE: &str = "config.cfg";
pub const RUNLOG_FILE: &str = "runlog.jsonl";
pub const BATCHES_FILE: &str = "batches.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MEMORY_DIR: &str = "memory";

/// First line of `runlog.jsonl`.
pub const RUNLOG_SCHEMA: &str = "dce-runlog";

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
    pub fn config(&self) -> PathBuf {
        self.root.join(CONFIG_FILE)
    }
    pub fn runlog(&self) -> PathBuf {
        self.root.join(RUNLOG_FILE)
    }
    pub fn batches(&self) -> PathBuf {
        self.root.join(BATCHES_FILE)
    }
    pub fn timings(&self) -> PathBuf {
        self.root.join(TIMINGS_FILE)
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.root.join(CHECKPOINT_FILE)
    }
    pub fn memory(&self) -> PathBuf {
        self.root.join(MEMORY_DIR)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    use std::fmt::Write as _;
    let digest = Sha256::digest(data);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            super::sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
