//! Turn-based game state machine and transcript replay.
//!
//! The teller opens each round with a message; the drawer answers with at most
//! one canvas action followed by its reply, which closes the round. The teller
//! may look at the canvas once per game.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DialogTranscript, Message, ReplayMismatch, RoundRecord};
use crate::metric;
use crate::scene::{ActionError, ClipArtPiece, ClipArtTypeId, DrawerAction, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Teller,
    Drawer,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Teller => Role::Drawer,
            Role::Drawer => Role::Teller,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Teller => "teller",
            Role::Drawer => "drawer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub max_message_chars: usize,
    pub max_rounds: usize,
    /// Wall-clock limit for live sessions; `None` disables it.
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig { max_message_chars: 140, max_rounds: 50, time_limit_secs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("target scene is empty")]
    EmptyTarget,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("it is the {expected}'s turn")]
    WrongTurn { expected: Role },
    #[error("message has {chars} characters, limit is {max}")]
    OverLength { chars: usize, max: usize },
    #[error("session already finished")]
    SessionFinished,
    #[error("the peek has already been used")]
    PeekExhausted,
    #[error("only the teller may peek")]
    PeekNotAllowed,
    #[error("an action was already submitted this turn")]
    ActionAlreadySubmitted,
    #[error("round limit of {0} reached")]
    MaxRounds(usize),
    #[error(transparent)]
    Action(#[from] ActionError),
}

impl EngineError {
    /// Stable machine-readable code, used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::EmptyTarget => "empty-target",
            EngineError::InvalidConfig(_) => "invalid-config",
            EngineError::WrongTurn { .. } => "wrong-turn",
            EngineError::OverLength { .. } => "over-length",
            EngineError::SessionFinished => "session-finished",
            EngineError::PeekExhausted => "peek-exhausted",
            EngineError::PeekNotAllowed => "peek-not-allowed",
            EngineError::ActionAlreadySubmitted => "action-already-submitted",
            EngineError::MaxRounds(_) => "max-rounds",
            EngineError::Action(_) => "invalid-action",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OpenRound {
    teller: Message,
    removed: Vec<ClipArtTypeId>,
    added: Vec<ClipArtPiece>,
    acted: bool,
    peek: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    scene_id: String,
    target: Scene,
    canvas: Scene,
    turn: Role,
    rounds: Vec<RoundRecord>,
    open: Option<OpenRound>,
    peek_used: bool,
    peek_pending: bool,
    finished: bool,
    config: GameConfig,
}

impl GameState {
    pub fn new_session(scene_id: impl Into<String>, target: Scene, config: GameConfig) -> Result<GameState, EngineError> {
        if target.is_empty() {
            return Err(EngineError::EmptyTarget);
        }
        if config.max_message_chars == 0 {
            return Err(EngineError::InvalidConfig("max_message_chars must be at least 1".into()));
        }
        Ok(GameState {
            scene_id: scene_id.into(),
            target,
            canvas: Scene::new(),
            turn: Role::Teller,
            rounds: Vec::new(),
            open: None,
            peek_used: false,
            peek_pending: false,
            finished: false,
            config,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    /// The hidden scene; only the teller may be shown this.
    pub fn target(&self) -> &Scene {
        &self.target
    }

    pub fn canvas(&self) -> &Scene {
        &self.canvas
    }

    pub fn turn(&self) -> Role {
        self.turn
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn peek_used(&self) -> bool {
        self.peek_used
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    /// Teller messages minus drawer messages; always 0 or 1.
    pub fn message_balance(&self) -> usize {
        usize::from(self.open.is_some())
    }

    pub fn time_expired(&self, elapsed_secs: f64) -> bool {
        self.config.time_limit_secs.is_some_and(|limit| elapsed_secs >= limit)
    }

    fn check_open(&self) -> Result<(), EngineError> {
        if self.finished {
            Err(EngineError::SessionFinished)
        } else {
            Ok(())
        }
    }

    pub fn submit_message(&mut self, role: Role, text: &str) -> Result<(), EngineError> {
        self.check_open()?;
        if role != self.turn {
            return Err(EngineError::WrongTurn { expected: self.turn });
        }
        let chars = text.chars().count();
        if chars > self.config.max_message_chars {
            return Err(EngineError::OverLength { chars, max: self.config.max_message_chars });
        }
        match role {
            Role::Teller => {
                if self.rounds.len() >= self.config.max_rounds {
                    return Err(EngineError::MaxRounds(self.config.max_rounds));
                }
                self.open = Some(OpenRound {
                    teller: Message::from_text(text),
                    removed: Vec::new(),
                    added: Vec::new(),
                    acted: false,
                    peek: std::mem::take(&mut self.peek_pending),
                });
            }
            Role::Drawer => self.close_round(Message::from_text(text)),
        }
        self.turn = role.other();
        Ok(())
    }

    fn close_round(&mut self, drawer: Message) {
        let open = self.open.take().expect("drawer turn implies an open round");
        self.rounds.push(RoundRecord {
            index: self.rounds.len(),
            teller: open.teller,
            drawer,
            removed: open.removed,
            added: open.added,
            canvas_after: self.canvas.clone(),
            peek: open.peek,
        });
    }

    /// Applies the drawer's canvas edits for this turn. Edits are recorded as
    /// a removal plus an addition of the same type.
    pub fn submit_action(&mut self, action: &DrawerAction) -> Result<(), EngineError> {
        self.check_open()?;
        if self.turn != Role::Drawer {
            return Err(EngineError::WrongTurn { expected: self.turn });
        }
        let open = self.open.as_mut().expect("drawer turn implies an open round");
        if open.acted {
            return Err(EngineError::ActionAlreadySubmitted);
        }
        self.canvas = self.canvas.apply(action)?;
        open.acted = true;
        open.removed = action.removes.iter().copied().chain(action.edits.iter().map(|p| p.kind)).collect();
        open.added = action.edits.iter().chain(&action.adds).copied().collect();
        Ok(())
    }

    pub fn peek(&mut self, role: Role) -> Result<Scene, EngineError> {
        self.check_open()?;
        if role != Role::Teller {
            return Err(EngineError::PeekNotAllowed);
        }
        if self.peek_used {
            return Err(EngineError::PeekExhausted);
        }
        self.peek_used = true;
        match self.open.as_mut() {
            Some(open) => open.peek = true,
            None => self.peek_pending = true,
        }
        Ok(self.canvas.clone())
    }

    /// Seals the game. A round still waiting for the drawer is closed with an
    /// empty reply.
    pub fn finish(&mut self, _role: Role) -> Result<DialogTranscript, EngineError> {
        self.check_open()?;
        if self.open.is_some() {
            self.close_round(Message::default());
            self.turn = Role::Teller;
        }
        self.finished = true;
        Ok(self.transcript())
    }

    /// Snapshot of the game so far as a transcript.
    pub fn transcript(&self) -> DialogTranscript {
        let mut t = DialogTranscript::new(self.scene_id.clone(), self.target.clone());
        t.rounds = self.rounds.clone();
        if self.finished {
            t.final_similarity = Some(metric::similarity(&self.target, &self.canvas));
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("round {round} of {scene_id} cannot be replayed: {source}")]
pub struct ReplayError {
    pub scene_id: String,
    pub round: usize,
    #[source]
    pub source: ActionError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// Canvas before any round, then after each round.
    pub canvases: Vec<Scene>,
    /// Rounds where the folded canvas differs from the recorded snapshot.
    pub mismatches: Vec<ReplayMismatch>,
}

impl Replay {
    pub fn final_canvas(&self) -> &Scene {
        self.canvases.last().expect("at least the empty canvas")
    }
}

/// Folds the recorded actions from an empty canvas.
pub fn replay(t: &DialogTranscript) -> Result<Replay, ReplayError> {
    let mut canvases = vec![Scene::new()];
    let mut mismatches = Vec::new();
    for r in &t.rounds {
        let prev = canvases.last().expect("nonempty");
        let next = prev.apply(&r.action()).map_err(|source| ReplayError { scene_id: t.scene_id.clone(), round: r.index, source })?;
        if next != r.canvas_after {
            mismatches.push(ReplayMismatch {
                scene_id: t.scene_id.clone(),
                round: r.index,
                reason: "folded canvas differs from recorded snapshot".into(),
            });
        }
        canvases.push(next);
    }
    Ok(Replay { canvases, mismatches })
}

/// Per-round check against the previous recorded snapshot, so one bad round
/// does not taint the rest of the dialog.
pub fn local_replay_mismatches(t: &DialogTranscript) -> Vec<ReplayMismatch> {
    let mut out = Vec::new();
    let mut prev = Scene::new();
    for r in &t.rounds {
        let reason = match prev.apply(&r.action()) {
            Ok(next) if next == r.canvas_after => None,
            Ok(_) => Some("recorded snapshot differs from previous snapshot plus edits".to_owned()),
            Err(e) => Some(e.to_string()),
        };
        if let Some(reason) = reason {
            out.push(ReplayMismatch { scene_id: t.scene_id.clone(), round: r.index, reason });
        }
        prev = r.canvas_after.clone();
    }
    out
}

/// Similarity to the target after 0, 1, ... rounds of recorded canvases.
pub fn similarity_by_round(t: &DialogTranscript) -> Vec<f64> {
    std::iter::once(Scene::new())
        .chain(t.rounds.iter().map(|r| r.canvas_after.clone()))
        .map(|c| metric::similarity(&t.target, &c))
        .collect()
}
