use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::model::LogEntry;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

/// Append-only JSONL log. Entries are never rewritten; state is rebuilt by
/// replaying the file from the top.
#[derive(Debug)]
pub struct Log {
    file: Option<(PathBuf, File)>,
}

impl Log {
    pub fn in_memory() -> Self {
        Log { file: None }
    }

    /// Opens (creating if needed) and returns the entries already present.
    pub fn open(path: &Path) -> Result<(Self, Vec<LogEntry>), StoreError> {
        let io = |source| StoreError::Io { path: path.display().to_string(), source };
        let mut entries = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                entries.push(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok((Log { file: Some((path.to_path_buf(), file)) }, entries))
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError> {
        if let Some((path, file)) = &mut self.file {
            let mut line = serde_json::to_string(entry).expect("log entry serializes");
            line.push('\n');
            let io = |source| StoreError::Io { path: path.display().to_string(), source };
            file.write_all(line.as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        Ok(())
    }
}
