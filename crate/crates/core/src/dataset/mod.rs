//! Dialog corpus: internal transcript schema, release import, crosstalk
//! splits and corpus statistics.
//!
//! The internal format is line-delimited JSON with one [`DialogTranscript`] per
//! line. The public release format is only touched by [`official`].

pub mod official;
pub mod split;
pub mod stats;
pub mod synth;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint;
use crate::scene::{ClipArtPiece, ClipArtTypeId, DrawerAction, Scene};

pub use split::{split_crosstalk, CorpusSplit, Partition};
pub use stats::{corpus_stats, CorpusStats};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no corpus files found under {0}")]
    NoCorpus(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch in {path} at {record}: {message}")]
    Schema { path: PathBuf, record: String, message: String },
    #[error("unsupported transcript schema version {0}")]
    Version(u32),
    #[error("scene {0} is not in the corpus")]
    UnknownScene(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }
}

/// A chat message: raw text for display, tokens for models and statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub text: String,
    pub tokens: Vec<String>,
}

impl Message {
    /// Whitespace tokenization; the corpus text is already tokenized upstream.
    pub fn from_text(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = text.split_whitespace().map(str::to_owned).collect();
        Message { text, tokens }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces: the string compared by edit distance.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// One teller message, the drawer's reply and the canvas edits made in between.
///
/// A moved or re-styled piece appears in both `removed` and `added`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    pub teller: Message,
    pub drawer: Message,
    #[serde(default)]
    pub removed: Vec<ClipArtTypeId>,
    #[serde(default)]
    pub added: Vec<ClipArtPiece>,
    pub canvas_after: Scene,
    #[serde(default)]
    pub peek: bool,
}

impl RoundRecord {
    pub fn action(&self) -> DrawerAction {
        DrawerAction { adds: self.added.clone(), removes: self.removed.clone(), edits: Vec::new() }
    }

    /// Member of the single-clip-art round set: no removals, exactly one add.
    pub fn is_single_clipart(&self) -> bool {
        self.removed.is_empty() && self.added.len() == 1
    }
}

/// Provenance of a transcript recorded by the live service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub human_role: String,
    pub agent_kind: String,
    pub agent_id: String,
    /// Unix seconds at which the session finished.
    pub finished_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogTranscript {
    pub schema_version: u32,
    pub scene_id: String,
    pub target: Scene,
    pub rounds: Vec<RoundRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Split label carried by the source release (`train`, `val`, `test`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub official_split: Option<String>,
    /// Similarity of the final canvas, stored when a live session is sealed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<SessionMeta>,
}

impl DialogTranscript {
    pub fn new(scene_id: impl Into<String>, target: Scene) -> Self {
        DialogTranscript {
            schema_version: SCHEMA_VERSION,
            scene_id: scene_id.into(),
            target,
            rounds: Vec::new(),
            duration: None,
            official_split: None,
            final_similarity: None,
            meta: None,
        }
    }

    /// Recorded canvas after the last round.
    pub fn final_canvas(&self) -> Scene {
        self.rounds.last().map(|r| r.canvas_after.clone()).unwrap_or_default()
    }

    pub fn teller_messages(&self) -> impl Iterator<Item = &Message> {
        self.rounds.iter().map(|r| &r.teller).filter(|m| !m.is_empty())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Immutable in-memory corpus ordered by scene id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    transcripts: Vec<DialogTranscript>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(mut transcripts: Vec<DialogTranscript>) -> Self {
        transcripts.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        let index = transcripts.iter().enumerate().map(|(i, t)| (t.scene_id.clone(), i)).collect();
        Corpus { transcripts, index }
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    pub fn transcripts(&self) -> &[DialogTranscript] {
        &self.transcripts
    }

    pub fn get(&self, scene_id: &str) -> Option<&DialogTranscript> {
        self.index.get(scene_id).map(|&i| &self.transcripts[i])
    }

    /// Transcripts whose scene id is in `ids`, in corpus order.
    pub fn subset<'a>(&'a self, ids: &'a std::collections::BTreeSet<String>) -> impl Iterator<Item = &'a DialogTranscript> + 'a {
        self.transcripts.iter().filter(move |t| ids.contains(&t.scene_id))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.transcripts {
            out.push_str(&t.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        fingerprint::sha256_hex(self.to_jsonl())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), DatasetError> {
        let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
        let mut w = BufWriter::new(file);
        for t in &self.transcripts {
            writeln!(w, "{}", t.to_json_line()).map_err(|e| DatasetError::io(path, e))?;
        }
        w.flush().map_err(|e| DatasetError::io(path, e))
    }

    pub fn load_jsonl(path: &Path) -> Result<Corpus, DatasetError> {
        let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
        let mut transcripts = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| DatasetError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: DialogTranscript = serde_json::from_str(&line).map_err(|e| DatasetError::Schema {
                path: path.to_path_buf(),
                record: format!("line {}", n + 1),
                message: e.to_string(),
            })?;
            if t.schema_version != SCHEMA_VERSION {
                return Err(DatasetError::Version(t.schema_version));
            }
            transcripts.push(t);
        }
        Ok(Corpus::new(transcripts))
    }
}

/// Fingerprint of a set of transcripts in iteration order.
pub fn transcripts_fingerprint<'a, I>(transcripts: I) -> String
where
    I: IntoIterator<Item = &'a DialogTranscript>,
{
    let lines: Vec<String> = transcripts.into_iter().map(DialogTranscript::to_json_line).collect();
    fingerprint::combine(lines.iter().map(String::as_str))
}

/// Per-round replay outcome of a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMismatch {
    pub scene_id: String,
    pub round: usize,
    pub reason: String,
}

/// A `(message, piece)` pair from a round with no removals and one add.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleRound {
    pub scene_id: String,
    pub round: usize,
    /// Tokens joined by single spaces.
    pub message: String,
    pub piece: ClipArtPiece,
}

pub fn extract_single_clipart_rounds<'a, I>(transcripts: I) -> Vec<SingleRound>
where
    I: IntoIterator<Item = &'a DialogTranscript>,
{
    let mut out = Vec::new();
    for t in transcripts {
        for r in &t.rounds {
            if r.is_single_clipart() {
                out.push(SingleRound { scene_id: t.scene_id.clone(), round: r.index, message: r.teller.joined(), piece: r.added[0] });
            }
        }
    }
    out
}
