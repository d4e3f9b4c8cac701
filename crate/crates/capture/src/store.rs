//! Append-only JSONL store of accepted submissions.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use shapeattn::dataset::SketchRecord;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Destination for accepted records. `append` returns only once the record
/// is durable.
pub trait RecordSink: Send {
    fn append(&mut self, record: &SketchRecord) -> io::Result<()>;
}

/// In-memory sink, for tests and dry runs.
impl RecordSink for Vec<SketchRecord> {
    fn append(&mut self, record: &SketchRecord) -> io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

#[derive(Debug)]
pub struct JsonlStore {
    file: File,
    path: PathBuf,
}

/// A reopened store and the records it already holds.
#[derive(Debug)]
pub struct Recovered {
    pub store: JsonlStore,
    pub records: Vec<SketchRecord>,
    /// Bytes cut from a torn or corrupt tail.
    pub truncated_bytes: u64,
}

/// Splits `bytes` into the longest prefix of complete, parseable lines.
/// Returns the records and the byte length of that prefix.
pub fn valid_prefix(bytes: &[u8]) -> (Vec<SketchRecord>, usize) {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            break;
        };
        let line = &bytes[pos..pos + nl];
        let end = pos + nl + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            pos = end;
            continue;
        }
        let parsed = std::str::from_utf8(line)
            .ok()
            .and_then(|s| SketchRecord::parse_line(s).ok());
        match parsed {
            Some(r) => records.push(r),
            None => break,
        }
        pos = end;
    }
    (records, pos)
}

impl JsonlStore {
    /// Opens or creates the store, cutting anything after the last valid
    /// line.
    pub fn open(path: &Path) -> Result<Recovered, StoreError> {
        let err = |source| StoreError::Io {
            path: path.to_owned(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(err)?;
        let (records, valid) = valid_prefix(&bytes);
        let truncated_bytes = (bytes.len() - valid) as u64;
        if truncated_bytes > 0 {
            warn!(
                "{}: dropping {truncated_bytes} bytes after the last valid record",
                path.display()
            );
            file.set_len(valid as u64).map_err(err)?;
            file.sync_all().map_err(err)?;
        }
        Ok(Recovered {
            store: JsonlStore {
                file,
                path: path.to_owned(),
            },
            records,
            truncated_bytes,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl RecordSink for JsonlStore {
    fn append(&mut self, record: &SketchRecord) -> io::Result<()> {
        let mut line = record.to_line().into_bytes();
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.file.sync_data()
    }
}
