//! Neural drawer: a bidirectional LSTM encodes the teller's last message, a
//! one-hidden-layer ReLU network maps it and the current canvas to per-type
//! add decisions, and greedy decoding turns those into an action.

pub mod gradcheck;
pub mod lstm;
pub mod model;
pub mod tensor;
pub mod train;
pub mod vocab;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentManifest, DrawerAgent, DrawerTurn};
use crate::dataset::Message;
use crate::scene::{DrawerAction, Scene};

pub use model::{drawer_forward, drawer_loss, encode_message, greedy_decode, ActionLogits, DrawerParams, Hyper, TrainingExample};
pub use train::{train_drawer, train_on_transcripts, TrainError, TrainLog};
pub use vocab::Vocab;

pub const CHECKPOINT_FORMAT: &str = "codraw-neural-drawer";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: expected format {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {format} v{version}")]
    Format { path: String, format: String, version: u32 },
    #[error("{path}: inconsistent parameter shapes")]
    Shape { path: String },
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    manifest: AgentManifest,
    hyper: Hyper,
    vocab: Vocab,
    params: DrawerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralDrawer {
    manifest: AgentManifest,
    hyper: Hyper,
    vocab: Vocab,
    params: DrawerParams,
}

impl NeuralDrawer {
    pub fn new(manifest: AgentManifest, hyper: Hyper, vocab: Vocab, params: DrawerParams) -> Self {
        NeuralDrawer { manifest, hyper, vocab, params }
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &DrawerParams {
        &self.params
    }

    pub fn logits(&self, message: &Message, canvas: &Scene) -> ActionLogits {
        let ids = self.vocab.encode(&message.tokens);
        model::forward(&self.params, &ids, &model::sparse_canvas(canvas)).expect("vocabulary matches parameters").logits
    }

    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            manifest: self.manifest.clone(),
            hyper: self.hyper.clone(),
            vocab: self.vocab.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(self.to_json().as_bytes()).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let p = path.display().to_string();
        let file = File::open(path).map_err(|source| CheckpointError::Io { path: p.clone(), source })?;
        let ck: Checkpoint =
            serde_json::from_reader(BufReader::new(file)).map_err(|source| CheckpointError::Json { path: p.clone(), source })?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Format { path: p, format: ck.format, version: ck.version });
        }
        let expected = DrawerParams::zeros(ck.vocab.len(), &ck.hyper);
        let shapes_ok = ck
            .params
            .blocks()
            .iter()
            .zip(expected.blocks())
            .all(|(a, b)| a.rows == b.rows && a.cols == b.cols && a.data.len() == b.data.len());
        if !shapes_ok || !ck.params.is_finite() {
            return Err(CheckpointError::Shape { path: p });
        }
        Ok(NeuralDrawer::new(ck.manifest, ck.hyper, ck.vocab, ck.params))
    }
}

impl DrawerAgent for NeuralDrawer {
    fn manifest(&self) -> &AgentManifest {
        &self.manifest
    }

    fn act(&self, message: &Message, canvas: &Scene) -> DrawerTurn {
        let action: DrawerAction = greedy_decode(&self.logits(message, canvas), canvas);
        DrawerTurn::ack(action)
    }
}
