//! Socket messages. Every message is a JSON object with a `kind` tag.

use serde::{Deserialize, Serialize};

use crate::agents::AgentManifest;
use crate::engine::Role;
use crate::scene::{DrawerAction, Scene};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientEvent {
    Join,
    Chat { text: String },
    Action { action: DrawerAction },
    Peek,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatLine {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerEvent {
    /// Full view for the human's role. `target` is sent only to tellers,
    /// `canvas` only to drawers.
    State {
        protocol_version: u32,
        session_id: String,
        role: Role,
        scene_id: String,
        turn: Role,
        round: usize,
        peek_available: bool,
        state: SessionState,
        chat: Vec<ChatLine>,
        #[serde(skip_serializing_if = "Option::is_none")]
        target: Option<Scene>,
        #[serde(skip_serializing_if = "Option::is_none")]
        canvas: Option<Scene>,
    },
    Chat {
        role: Role,
        text: String,
    },
    ActionApplied {
        canvas: Scene,
    },
    PeekResult {
        canvas: Scene,
    },
    Error {
        code: String,
        message: String,
    },
    Finished {
        score: f64,
        rounds: usize,
        target: Scene,
        canvas: Scene,
    },
}

impl ServerEvent {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerEvent::Error { code: code.to_owned(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub human_role: Role,
    /// Agent spec for the other role, e.g. `rb:teller_train`.
    pub agent: String,
    #[serde(default)]
    pub scene_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub human_role: Role,
    pub agent: AgentManifest,
    pub scene_id: String,
    pub state: SessionState,
}
