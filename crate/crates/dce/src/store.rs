//! Durable semantic memory: an append-only record log under a store
//! directory, replayed into a [`SemanticIndex`] on open.
//!
//! Layout and byte format are described in `docs/formats.md`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use dce_core::vector::Embedding;
use dce_core::{Idea, MemoryEntry, MemoryError, SemanticIndex};

pub const RECORD_VERSION: u8 = 1;
pub const LOG_FILE: &str = "entries.log";
pub const META_FILE: &str = "meta";
pub const LOCK_FILE: &str = "LOCK";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("memory store I/O: {0}")]
    Io(#[from] io::Error),
    #[error("memory store {0} is locked by another process")]
    Locked(PathBuf),
    #[error("corrupt record at byte {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
    #[error("bad meta file: {0}")]
    Meta(String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("embedding model {got:?} differs from store model {expected:?}")]
    Model { expected: String, got: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Meta {
    dimension: Option<usize>,
    model_id: Option<String>,
    entries: usize,
}

impl Meta {
    fn parse(text: &str) -> Result<Self, StoreError> {
        let mut m = Meta::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| StoreError::Meta(format!("line without '=': {line}")))?;
            let bad = |_| StoreError::Meta(format!("bad value for {k}: {v}"));
            match k.trim() {
                "format" if v.trim() != "dce-memory" => {
                    return Err(StoreError::Meta(format!("unknown format {v}")))
                }
                "version" if v.trim() != RECORD_VERSION.to_string() => {
                    return Err(StoreError::Meta(format!("unsupported version {v}")))
                }
                "dimension" => m.dimension = Some(v.trim().parse().map_err(bad)?),
                "model_id" => m.model_id = Some(v.trim().to_string()),
                "entries" => m.entries = v.trim().parse().map_err(bad)?,
                _ => {}
            }
        }
        Ok(m)
    }

    fn render(&self) -> String {
        let mut s = format!("format=dce-memory\nversion={RECORD_VERSION}\n");
        if let Some(d) = self.dimension {
            s.push_str(&format!("dimension={d}\n"));
        }
        if let Some(m) = &self.model_id {
            s.push_str(&format!("model_id={m}\n"));
        }
        s.push_str(&format!("entries={}\n", self.entries));
        s
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn encode(entry: &MemoryEntry) -> Vec<u8> {
    let v = entry.embedding.vector();
    let mut p = Vec::with_capacity(64 + v.len() * 8);
    p.extend_from_slice(&entry.accept_order.to_le_bytes());
    p.extend_from_slice(&entry.batch_index.to_le_bytes());
    p.extend_from_slice(&entry.idea.slot_index.to_le_bytes());
    p.extend_from_slice(&entry.idea.probability.to_le_bytes());
    put_str(&mut p, &entry.idea.name);
    put_str(&mut p, &entry.idea.description);
    put_str(&mut p, &entry.idea.category);
    p.extend_from_slice(&(v.len() as u32).to_le_bytes());
    for x in v {
        p.extend_from_slice(&x.to_le_bytes());
    }
    let mut rec = Vec::with_capacity(p.len() + 9);
    rec.push(RECORD_VERSION);
    rec.extend_from_slice(&(p.len() as u32).to_le_bytes());
    rec.extend_from_slice(&p);
    rec.extend_from_slice(&crc32fast::hash(&p).to_le_bytes());
    rec
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn string(&mut self) -> Option<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).ok()
    }
}

fn decode(payload: &[u8], model_id: &str) -> Option<MemoryEntry> {
    let mut c = Cursor { buf: payload, pos: 0 };
    let accept_order = c.u64()?;
    let batch_index = c.u32()?;
    let slot_index = c.u32()?;
    let probability = c.f64()?;
    let name = c.string()?;
    let description = c.string()?;
    let category = c.string()?;
    let dim = c.u32()? as usize;
    let mut v = Vec::with_capacity(dim);
    for _ in 0..dim {
        v.push(c.f64()?);
    }
    if c.pos != payload.len() {
        return None;
    }
    Some(MemoryEntry {
        idea: Idea {
            name,
            description,
            category,
            probability,
            batch_index,
            slot_index,
        },
        embedding: Embedding::new(v, model_id).ok()?,
        accept_order,
        batch_index,
    })
}

/// Result of scanning a log: the decoded entries, the byte offset after each
/// one, and whether an unfinished record followed the last good one.
struct Scan {
    entries: Vec<MemoryEntry>,
    ends: Vec<u64>,
    torn_tail: bool,
}

fn scan(bytes: &[u8], model_id: &str) -> Result<Scan, StoreError> {
    let mut entries = Vec::new();
    let mut ends = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let corrupt = |reason: &str| StoreError::Corrupt {
            offset: pos as u64,
            reason: reason.to_string(),
        };
        if bytes.len() - pos < 5 {
            return Ok(Scan { entries, ends, torn_tail: true });
        }
        if bytes[pos] != RECORD_VERSION {
            return Err(corrupt(&format!("unknown record version {}", bytes[pos])));
        }
        let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
        let end = pos + 5 + len + 4;
        if end > bytes.len() {
            return Ok(Scan { entries, ends, torn_tail: true });
        }
        let payload = &bytes[pos + 5..pos + 5 + len];
        let crc = u32::from_le_bytes(bytes[end - 4..end].try_into().unwrap());
        if crc != crc32fast::hash(payload) {
            // A bad checksum on the final record is an interrupted append.
            if end == bytes.len() {
                return Ok(Scan { entries, ends, torn_tail: true });
            }
            return Err(corrupt("checksum mismatch"));
        }
        entries.push(decode(payload, model_id).ok_or_else(|| corrupt("malformed payload"))?);
        ends.push(end as u64);
        pos = end;
    }
    Ok(Scan { entries, ends, torn_tail: false })
}

fn read_meta(dir: &Path) -> Result<Meta, StoreError> {
    match fs::read_to_string(dir.join(META_FILE)) {
        Ok(t) => Meta::parse(&t),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Meta::default()),
        Err(e) => Err(e.into()),
    }
}

fn build_index(entries: Vec<MemoryEntry>) -> Result<SemanticIndex, StoreError> {
    let mut index = SemanticIndex::new();
    for e in entries {
        index.insert(e)?;
    }
    Ok(index)
}

/// Reads a store without taking its lock. A torn final record is ignored.
pub fn load(dir: &Path) -> Result<SemanticIndex, StoreError> {
    let meta = read_meta(dir)?;
    let mut bytes = Vec::new();
    match File::open(dir.join(LOG_FILE)) {
        Ok(f) => {
            BufReader::new(f).read_to_end(&mut bytes)?;
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    let model = meta.model_id.unwrap_or_default();
    build_index(scan(&bytes, &model)?.entries)
}

/// Exclusive handle on a store directory.
pub struct MemoryStore {
    dir: PathBuf,
    index: SemanticIndex,
    log: File,
    ends: Vec<u64>,
    meta: Meta,
    sync: bool,
    _lock: File,
}

impl std::fmt::Debug for MemoryStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryStore")
            .field("dir", &self.dir)
            .field("entries", &self.index.len())
            .finish()
    }
}

impl MemoryStore {
    /// Opens or creates the store at `dir`, replays the log, and cuts off an
    /// interrupted final record.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(dir)),
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }
        let meta = read_meta(&dir)?;
        let mut log = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(dir.join(LOG_FILE))?;
        let mut bytes = Vec::new();
        log.read_to_end(&mut bytes)?;
        let model = meta.model_id.clone().unwrap_or_default();
        let s = scan(&bytes, &model)?;
        let good = s.ends.last().copied().unwrap_or(0);
        if s.torn_tail {
            log::warn!(
                "discarding {} bytes of an interrupted record in {}",
                bytes.len() as u64 - good,
                dir.display()
            );
            log.set_len(good)?;
            log.sync_all()?;
        }
        log.seek(SeekFrom::Start(good))?;
        let ends = s.ends;
        let index = build_index(s.entries)?;
        let mut store = Self {
            dir,
            index,
            log,
            ends,
            meta,
            sync: true,
            _lock: lock,
        };
        if !store.dir.join(META_FILE).exists() {
            store.write_meta()?;
        }
        Ok(store)
    }

    /// Skips `fsync` after each append. Appends are still written before
    /// `insert` returns; only crash durability is weakened.
    pub fn without_sync(mut self) -> Self {
        self.sync = false;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn index(&self) -> &SemanticIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn model_id(&self) -> Option<&str> {
        self.meta.model_id.as_deref()
    }

    fn write_meta(&mut self) -> Result<(), StoreError> {
        self.meta.entries = self.index.len();
        let tmp = self.dir.join("meta.tmp");
        let mut f = File::create(&tmp)?;
        f.write_all(self.meta.render().as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, self.dir.join(META_FILE))?;
        Ok(())
    }

    /// Appends `entry` to the log and the index. Returns once the record
    /// is on disk.
    pub fn insert(&mut self, entry: MemoryEntry) -> Result<u64, StoreError> {
        let model = entry.embedding.model_id().to_string();
        match &self.meta.model_id {
            Some(m) if *m != model => {
                return Err(StoreError::Model {
                    expected: m.clone(),
                    got: model,
                })
            }
            _ => {}
        }
        let rec = encode(&entry);
        let dim = entry.embedding.dimension();
        let order = self.index.insert(entry)?;
        let start = self.ends.last().copied().unwrap_or(0);
        let written = self.log.write_all(&rec).and_then(|_| {
            if self.sync {
                self.log.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            self.index.truncate(self.index.len() - 1);
            let _ = self.log.set_len(start);
            let _ = self.log.seek(SeekFrom::Start(start));
            return Err(e.into());
        }
        self.ends.push(start + rec.len() as u64);
        if self.meta.model_id.is_none() || self.meta.dimension.is_none() {
            self.meta.model_id = Some(model);
            self.meta.dimension = Some(dim);
            self.write_meta()?;
        }
        Ok(order)
    }

    /// Drops every entry past the first `len`, on disk and in memory.
    pub fn truncate(&mut self, len: usize) -> Result<(), StoreError> {
        if len >= self.index.len() {
            return Ok(());
        }
        let end = if len == 0 { 0 } else { self.ends[len - 1] };
        self.log.set_len(end)?;
        self.log.sync_all()?;
        self.log.seek(SeekFrom::Start(end))?;
        self.ends.truncate(len);
        self.index.truncate(len);
        self.write_meta()
    }

    /// Flushes the advisory entry counter in the meta file.
    pub fn close(mut self) -> Result<(), StoreError> {
        self.write_meta()
    }
}
