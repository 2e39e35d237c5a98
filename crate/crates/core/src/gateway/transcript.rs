use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{ChatExchange, GatewayError};

/// Single serialized writer of line-delimited [`ChatExchange`] records.
#[derive(Debug)]
pub struct TranscriptWriter {
    path: PathBuf,
    file: Mutex<File>,
}

fn transcript_error(path: &Path, reason: impl ToString) -> GatewayError {
    GatewayError::Transcript {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<Self, GatewayError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| transcript_error(path, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| transcript_error(path, e))?;
        Ok(Self {
            path: path.to_owned(),
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, exchange: &ChatExchange) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(exchange).map_err(|e| transcript_error(&self.path, e))?;
        line.push('\n');
        let mut file = self.file.lock().expect("transcript lock");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| transcript_error(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<ChatExchange>, GatewayError> {
    let text = fs::read_to_string(path).map_err(|e| transcript_error(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| transcript_error(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Rewrites a transcript with records ordered by transcript id (stable for
/// equal ids), so parallel runs produce identical files.
pub fn sort_transcript_file(path: &Path) -> Result<(), GatewayError> {
    let mut records = read_transcript(path)?;
    records.sort_by(|a, b| a.transcript_id.cmp(&b.transcript_id));
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).map_err(|e| transcript_error(path, e))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| transcript_error(path, e))
}
