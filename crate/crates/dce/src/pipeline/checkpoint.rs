//! Per-batch campaign snapshot.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::rundir::sha256_hex;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub prompt: u64,
    pub completion: u64,
    pub embedding: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngSnapshot {
    pub fn of(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut r = ChaCha8Rng::from_seed(self.seed);
        r.set_stream(self.stream);
        r.set_word_pos(self.word_pos);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// SHA-256 of the canonical config text.
    pub config_sha256: String,
    /// First batch not yet completed; `batches + 1` when finished.
    pub next_batch: u32,
    pub rotation_position: u32,
    pub candidate_records: u64,
    pub batch_records: u64,
    pub timing_records: u64,
    pub memory_len: u64,
    pub rng: RngSnapshot,
    pub generator_state: Option<Value>,
    pub tokens: TokenTotals,
    pub checksum: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("reading checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
}

impl Checkpoint {
    fn digest(&self) -> String {
        let mut c = self.clone();
        c.checksum = String::new();
        sha256_hex(serde_json::to_string(&c).expect("checkpoint serializes").as_bytes())
    }

    pub fn seal(mut self) -> Self {
        self.checksum = self.digest();
        self
    }

    /// Writes to a temporary file, then renames over `path`.
    pub fn write(&self, path: &Path, sync: bool) -> std::io::Result<()> {
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
            f.write_all(b"\n")?;
            if sync {
                f.sync_all()?;
            }
        }
        fs::rename(&tmp, path)?;
        if sync {
            if let Some(parent) = path.parent() {
                if let Ok(d) = File::open(parent) {
                    let _ = d.sync_all();
                }
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path)?;
        let c: Checkpoint =
            serde_json::from_str(&text).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Corrupt(format!("unsupported version {}", c.version)));
        }
        if c.checksum != c.digest() {
            return Err(CheckpointError::Corrupt("checksum mismatch".into()));
        }
        Ok(c)
    }
}
