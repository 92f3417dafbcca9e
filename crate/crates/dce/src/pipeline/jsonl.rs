//! Line-oriented JSON files.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct JsonlWriter {
    file: BufWriter<File>,
    lines: u64,
}

impl JsonlWriter {
    /// Opens for append; `lines` is the number of records already present.
    pub fn append(path: &Path, lines: u64) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            file: BufWriter::new(file),
            lines,
        })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        serde_json::to_writer(&mut self.file, value)?;
        self.file.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn flush(&mut self, sync: bool) -> io::Result<()> {
        self.file.flush()?;
        if sync {
            self.file.get_ref().sync_data()?;
        }
        Ok(())
    }
}

/// Keeps the first `keep` newline-terminated lines and drops the rest.
pub fn truncate_lines(path: &Path, keep: u64) -> io::Result<()> {
    let bytes = fs::read(path)?;
    let mut end = 0usize;
    let mut seen = 0u64;
    for (i, b) in bytes.iter().enumerate() {
        if seen == keep {
            break;
        }
        if *b == b'\n' {
            seen += 1;
            end = i + 1;
        }
    }
    if seen < keep {
        return Err(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("{} has {seen} complete lines, expected at least {keep}", path.display()),
        ));
    }
    if end < bytes.len() {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(end as u64)?;
        f.sync_data()?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct JsonlRead<T> {
    pub values: Vec<T>,
    /// A trailing line without a newline, or one that failed to parse, was
    /// skipped.
    pub torn_tail: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// Reads every record after skipping `skip` leading lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, skip: usize) -> Result<JsonlRead<T>, JsonlError> {
    let text = fs::read_to_string(path)?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut values = Vec::new();
    let mut torn_tail = false;
    for (i, line) in lines.iter().enumerate().skip(skip) {
        let last = i + 1 == lines.len();
        match serde_json::from_str(line) {
            Ok(v) if !(last && !complete) => values.push(v),
            Ok(_) => torn_tail = true,
            Err(_) if last => torn_tail = true,
            Err(source) => {
                return Err(JsonlError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })
            }
        }
    }
    Ok(JsonlRead { values, torn_tail })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_truncate_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        let mut w = JsonlWriter::append(&p, 0).unwrap();
        for i in 0..5u32 {
            w.write(&i).unwrap();
        }
        w.flush(true).unwrap();
        truncate_lines(&p, 3).unwrap();
        let r: JsonlRead<u32> = read_jsonl(&p, 1).unwrap();
        assert_eq!(r.values, vec![1, 2]);
        assert!(!r.torn_tail);
        assert!(truncate_lines(&p, 4).is_err());
    }

    #[test]
    fn torn_tail_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        fs::write(&p, "1\n2\n{\"a\":").unwrap();
        let r: JsonlRead<u32> = read_jsonl(&p, 0).unwrap();
        assert_eq!(r.values, vec![1, 2]);
        assert!(r.torn_tail);
        fs::write(&p, "1\nx\n3\n").unwrap();
        assert!(read_jsonl::<u32>(&p, 0).is_err());
    }
}
