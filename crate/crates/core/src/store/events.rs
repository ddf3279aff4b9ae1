//! Append-only tutoring event log, one JSON object per line.
//!
//! There is deliberately no way to rewrite or delete a past event through
//! this type.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use crate::domain::TutorEvent;
use crate::error::{Error, Result};

pub struct EventLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl EventLog {
    /// Opens the log, dropping a torn trailing line left by a crash.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if let Ok(bytes) = fs::read(&path) {
            if !bytes.is_empty() && !bytes.ends_with(b"\n") {
                let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                OpenOptions::new().write(true).open(&path)?.set_len(keep as u64)?;
                tracing::warn!(path = %path.display(), dropped = bytes.len() - keep, "discarded torn event line");
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, event: &TutorEvent) -> Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut file = self.file.lock();
        file.write_all(&line).and_then(|_| file.sync_data()).map_err(Error::Io)
    }

    /// Every event in append order.
    pub fn read_all(&self) -> Result<Vec<TutorEvent>> {
        let _hold = self.file.lock();
        let reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }
}
