//! Teller and drawer agents.
//!
//! Tellers never see drawer replies and drawers only reply "ok": the teller is
//! driven by the target scene and its own message history, the drawer by the
//! teller's last message and the current canvas.

pub mod edit_distance;
pub mod nearest;
pub mod registry;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DialogTranscript, Message, Partition};
use crate::scene::{DrawerAction, Scene};

pub use edit_distance::edit_distance;
pub use nearest::{rb_teller_order, NearestNeighborIndex, RuleBasedDrawer, RuleBasedTeller};
pub use registry::{AgentFactory, AgentSpec};

/// Default drawer reply.
pub const ACK: &str = "ok";

/// Which training partition an agent was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainedOn {
    None,
    TellerTrain,
    DrawerTrain,
}

impl TrainedOn {
    pub fn partition(self) -> Option<Partition> {
        match self {
            TrainedOn::None => None,
            TrainedOn::TellerTrain => Some(Partition::TellerTrain),
            TrainedOn::DrawerTrain => Some(Partition::DrawerTrain),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrainedOn::None => "none",
            TrainedOn::TellerTrain => "teller_train",
            TrainedOn::DrawerTrain => "drawer_train",
        }
    }
}

impl fmt::Display for TrainedOn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainedOn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(TrainedOn::None),
            "teller_train" => Ok(TrainedOn::TellerTrain),
            "drawer_train" => Ok(TrainedOn::DrawerTrain),
            _ => Err(format!("agents can only be trained on teller_train or drawer_train, not {s:?}")),
        }
    }
}

/// Identity and data provenance of an agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentManifest {
    pub agent_kind: String,
    pub trained_on: TrainedOn,
    pub data_fingerprint: String,
}

impl AgentManifest {
    pub fn untrained(kind: impl Into<String>) -> Self {
        AgentManifest { agent_kind: kind.into(), trained_on: TrainedOn::None, data_fingerprint: String::new() }
    }
}

pub trait TellerAgent: Send + Sync {
    fn manifest(&self) -> &AgentManifest;

    /// Next message given the messages this teller already sent in the
    /// current game; `None` means stop.
    fn next_message(&self, target: &Scene, history: &[String]) -> Option<String>;
}

/// What the drawer does in one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawerTurn {
    pub action: DrawerAction,
    pub reply: String,
}

impl DrawerTurn {
    pub fn ack(action: DrawerAction) -> Self {
        DrawerTurn { action, reply: ACK.to_owned() }
    }
}

/// Where the drawer is being called from. Only pseudo-agents that replay
/// recorded data look past `message` and `canvas`.
#[derive(Debug, Clone, Copy)]
pub struct DrawerContext<'a> {
    pub scene_id: &'a str,
    pub round: usize,
    pub message: &'a Message,
    pub canvas: &'a Scene,
}

pub trait DrawerAgent: Send + Sync {
    fn manifest(&self) -> &AgentManifest;

    fn act(&self, message: &Message, canvas: &Scene) -> DrawerTurn;

    /// Entry point used by the harness. An empty teller message leaves the
    /// canvas alone.
    fn act_in(&self, ctx: &DrawerContext<'_>) -> DrawerTurn {
        if ctx.message.is_empty() {
            DrawerTurn::ack(DrawerAction::default())
        } else {
            self.act(ctx.message, ctx.canvas)
        }
    }
}

/// Replays a recorded human teller's messages, ignoring the target it is
/// given and anything the drawer says.
#[derive(Debug, Clone)]
pub struct ScriptedTeller {
    manifest: AgentManifest,
    script: Vec<String>,
}

impl ScriptedTeller {
    pub fn new(transcript: &DialogTranscript) -> Self {
        ScriptedTeller {
            manifest: AgentManifest::untrained(format!("script:{}", transcript.scene_id)),
            script: transcript.teller_messages().map(|m| m.text.clone()).collect(),
        }
    }
}

impl TellerAgent for ScriptedTeller {
    fn manifest(&self) -> &AgentManifest {
        &self.manifest
    }

    fn next_message(&self, _target: &Scene, history: &[String]) -> Option<String> {
        self.script.get(history.len()).cloned()
    }
}

/// Never touches the canvas.
#[derive(Debug, Clone)]
pub struct NoopDrawer {
    manifest: AgentManifest,
}

impl Default for NoopDrawer {
    fn default() -> Self {
        NoopDrawer { manifest: AgentManifest::untrained("noop") }
    }
}

impl DrawerAgent for NoopDrawer {
    fn manifest(&self) -> &AgentManifest {
        &self.manifest
    }

    fn act(&self, _message: &Message, _canvas: &Scene) -> DrawerTurn {
        DrawerTurn::ack(DrawerAction::default())
    }
}

/// Pseudo-drawer that moves the canvas to the recorded human snapshot of the
/// current round. Used to check the harness against the corpus itself.
#[derive(Debug, Clone)]
pub struct HumanReplayDrawer {
    manifest: AgentManifest,
    snapshots: HashMap<String, Vec<Scene>>,
}

impl HumanReplayDrawer {
    pub fn new<'a>(transcripts: impl IntoIterator<Item = &'a DialogTranscript>) -> Self {
        let snapshots =
            transcripts.into_iter().map(|t| (t.scene_id.clone(), t.rounds.iter().map(|r| r.canvas_after.clone()).collect())).collect();
        HumanReplayDrawer { manifest: AgentManifest::untrained("human-replay"), snapshots }
    }
}

impl DrawerAgent for HumanReplayDrawer {
    fn manifest(&self) -> &AgentManifest {
        &self.manifest
    }

    fn act(&self, _message: &Message, _canvas: &Scene) -> DrawerTurn {
        DrawerTurn::ack(DrawerAction::default())
    }

    fn act_in(&self, ctx: &DrawerContext<'_>) -> DrawerTurn {
        let recorded = self.snapshots.get(ctx.scene_id).and_then(|s| s.get(ctx.round));
        match recorded {
            Some(after) => DrawerTurn::ack(DrawerAction::diff(ctx.canvas, after)),
            None => DrawerTurn::ack(DrawerAction::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RoundRecord;
    use crate::scene::testing::obj;

    fn transcript(n: usize) -> DialogTranscript {
        let mut t = DialogTranscript::new("d", Scene::new());
        for i in 0..n {
            t.rounds.push(RoundRecord {
                index: i,
                teller: Message::from_text(format!("describe piece {i}")),
                drawer: Message::from_text("ok"),
                removed: vec![],
                added: vec![],
                canvas_after: Scene::new(),
                peek: false,
            });
        }
        t
    }

    #[test]
    fn script_emits_messages_then_stops() {
        let teller = ScriptedTeller::new(&transcript(7));
        let target = Scene::from_pieces([obj("sun", 0.1, 0.1)]).unwrap();
        let mut history = Vec::new();
        while let Some(m) = teller.next_message(&target, &history) {
            history.push(m);
        }
        assert_eq!(history.len(), 7);
        assert_eq!(history[3], "describe piece 3");
        assert_eq!(teller.manifest().trained_on, TrainedOn::None);
    }

    #[test]
    fn script_ignores_target() {
        let teller = ScriptedTeller::new(&transcript(2));
        let a = teller.next_message(&Scene::new(), &[]);
        let b = teller.next_message(&Scene::from_pieces([obj("sun", 0.1, 0.1)]).unwrap(), &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_script_stops_immediately() {
        assert_eq!(ScriptedTeller::new(&transcript(0)).next_message(&Scene::new(), &[]), None);
    }

    #[test]
    fn trained_on_rejects_eval_partitions() {
        assert!("test".parse::<TrainedOn>().is_err());
        assert_eq!("drawer_train".parse::<TrainedOn>(), Ok(TrainedOn::DrawerTrain));
    }
}
