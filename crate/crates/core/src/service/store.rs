use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;

use crate::dataset::DialogTranscript;

/// Append-only JSONL file of finished sessions.
pub struct TranscriptStore {
    path: PathBuf,
    lock: Mutex<()>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct TranscriptFilter {
    pub agent_kind: Option<String>,
    pub agent_id: Option<String>,
    pub human_role: Option<String>,
    pub scene_id: Option<String>,
    /// Unix seconds, inclusive.
    pub since: Option<u64>,
    /// Unix seconds, inclusive.
    pub until: Option<u64>,
}

impl TranscriptFilter {
    pub fn matches(&self, t: &DialogTranscript) -> bool {
        let Some(m) = &t.meta else { return false };
        let eq = |want: &Option<String>, have: &str| want.as_deref().is_none_or(|w| w == have);
        eq(&self.agent_kind, &m.agent_kind)
            && eq(&self.agent_id, &m.agent_id)
            && eq(&self.human_role, &m.human_role)
            && eq(&self.scene_id, &t.scene_id)
            && self.since.is_none_or(|s| m.finished_at >= s)
            && self.until.is_none_or(|u| m.finished_at <= u)
    }
}

impl TranscriptStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        TranscriptStore { path: path.into(), lock: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the transcript as one line with a single `write` call.
    pub fn append(&self, t: &DialogTranscript) -> io::Result<()> {
        let mut line = t.to_json_line();
        line.push('\n');
        let _guard = self.lock.lock().expect("store lock");
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        f.sync_data()
    }

    /// Stored transcripts passing `filter`. A torn final line is skipped.
    pub fn list(&self, filter: &TranscriptFilter) -> io::Result<Vec<DialogTranscript>> {
        let _guard = self.lock.lock().expect("store lock");
        let f = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<DialogTranscript>(&line) {
                Ok(t) if filter.matches(&t) => out.push(t),
                Ok(_) => {}
                Err(e) => tracing::warn!(line = i + 1, error = %e, "skipping unreadable transcript line"),
            }
        }
        Ok(out)
    }
}
