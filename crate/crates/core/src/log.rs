//! Append-only record log: one JSON call record per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::CallRecord;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Where finished call records go.
pub trait RecordSink: Send {
    fn persist(&mut self, record: &CallRecord) -> Result<(), LogError>;
}

/// In-memory sink, handy in tests.
#[derive(Debug, Default, Clone)]
pub struct MemorySink(pub Vec<CallRecord>);

impl RecordSink for MemorySink {
    fn persist(&mut self, record: &CallRecord) -> Result<(), LogError> {
        self.0.push(record.clone());
        Ok(())
    }
}

pub struct RecordLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordLog {
    /// Opens for appending, creating the file if needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::with_options(path.as_ref(), OpenOptions::new().create(true).append(true))
    }

    /// Starts a fresh log, discarding any previous content.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::with_options(
            path.as_ref(),
            OpenOptions::new().create(true).write(true).truncate(true),
        )
    }

    fn with_options(path: &Path, options: &OpenOptions) -> Result<Self, LogError> {
        let file = options.open(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &CallRecord) -> Result<(), LogError> {
        let io = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        let line = serde_json::to_string(record).expect("records serialize");
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.out.write_all(b"\n").map_err(io)?;
        self.out.flush().map_err(io)
    }
}

impl RecordSink for RecordLog {
    fn persist(&mut self, record: &CallRecord) -> Result<(), LogError> {
        self.append(record)
    }
}

/// Reads every record of a log. Blank lines are skipped.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<CallRecord>, LogError> {
    let path = path.as_ref();
    let io = |source| LogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| LogError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}
