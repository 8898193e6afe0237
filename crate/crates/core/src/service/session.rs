use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use super::protocol::{ChatLine, ClientEvent, ServerEvent, SessionDescriptor, SessionState, PROTOCOL_VERSION};
use crate::agents::{AgentManifest, DrawerAgent, DrawerContext, TellerAgent};
use crate::dataset::{DialogTranscript, Message, SessionMeta};
use crate::engine::{EngineError, GameConfig, GameState, Role};
use crate::scene::Scene;

/// The machine side of a session.
#[derive(Clone)]
pub enum Opponent {
    Teller(Arc<dyn TellerAgent>),
    Drawer(Arc<dyn DrawerAgent>),
}

impl Opponent {
    fn manifest(&self) -> &AgentManifest {
        match self {
            Opponent::Teller(t) => t.manifest(),
            Opponent::Drawer(d) => d.manifest(),
        }
    }
}

/// What handling one client event produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub events: Vec<ServerEvent>,
    /// Set once, when the session finishes.
    pub transcript: Option<DialogTranscript>,
}

/// One human playing against one agent. Events must be applied in arrival order.
pub struct Session {
    id: String,
    human_role: Role,
    agent_spec: String,
    opponent: Opponent,
    game: GameState,
    chat: Vec<ChatLine>,
    teller_history: Vec<String>,
    started: Instant,
    joined: bool,
}

impl Session {
    /// Starts a session. An agent teller speaks first straight away, so the
    /// returned outcome may already hold its message, or a finished transcript
    /// if it had nothing to say.
    pub fn new(
        id: String,
        agent_spec: String,
        opponent: Opponent,
        scene_id: &str,
        target: Scene,
        config: GameConfig,
    ) -> Result<(Self, Outcome), EngineError> {
        let human_role = match opponent {
            Opponent::Teller(_) => Role::Drawer,
            Opponent::Drawer(_) => Role::Teller,
        };
        let game = GameState::new_session(scene_id, target, config)?;
        let mut s = Session {
            id,
            human_role,
            agent_spec,
            opponent,
            game,
            chat: Vec::new(),
            teller_history: Vec::new(),
            started: Instant::now(),
            joined: false,
        };
        let mut out = Outcome::default();
        s.agent_teller_turn(&mut out);
        Ok((s, out))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn human_role(&self) -> Role {
        self.human_role
    }

    pub fn is_finished(&self) -> bool {
        self.game.is_finished()
    }

    pub fn canvas(&self) -> &Scene {
        self.game.canvas()
    }

    fn state_label(&self) -> SessionState {
        if self.game.is_finished() {
            SessionState::Finished
        } else if self.joined {
            SessionState::Active
        } else {
            SessionState::Open
        }
    }

    pub fn descriptor(&self) -> SessionDescriptor {
        SessionDescriptor {
            session_id: self.id.clone(),
            human_role: self.human_role,
            agent: self.opponent.manifest().clone(),
            scene_id: self.game.scene_id().to_owned(),
            state: self.state_label(),
        }
    }

    /// The human's view. Drawers never receive the target before the end.
    pub fn state_event(&self) -> ServerEvent {
        let finished = self.game.is_finished();
        ServerEvent::State {
            protocol_version: PROTOCOL_VERSION,
            session_id: self.id.clone(),
            role: self.human_role,
            scene_id: self.game.scene_id().to_owned(),
            turn: self.game.turn(),
            round: self.game.rounds().len(),
            peek_available: self.human_role == Role::Teller && !self.game.peek_used() && !finished,
            state: self.state_label(),
            chat: self.chat.clone(),
            target: (self.human_role == Role::Teller || finished).then(|| self.game.target().clone()),
            canvas: (self.human_role == Role::Drawer || finished).then(|| self.game.canvas().clone()),
        }
    }

    pub fn handle(&mut self, event: ClientEvent) -> Outcome {
        let mut out = Outcome::default();
        if self.game.is_finished() {
            if event == ClientEvent::Join {
                out.events.push(self.state_event());
            } else {
                out.events.push(ServerEvent::error(EngineError::SessionFinished.code(), "session already finished"));
            }
            return out;
        }
        if self.game.time_expired(self.started.elapsed().as_secs_f64()) {
            self.finish(&mut out);
            return out;
        }
        match event {
            ClientEvent::Join => {
                self.joined = true;
                out.events.push(self.state_event());
            }
            ClientEvent::Chat { text } => self.human_chat(text, &mut out),
            ClientEvent::Action { action } => {
                if self.human_role != Role::Drawer {
                    out.events.push(ServerEvent::error("action-not-allowed", "only the drawer edits the canvas"));
                } else {
                    match self.game.submit_action(&action) {
                        Ok(()) => out.events.push(ServerEvent::ActionApplied { canvas: self.game.canvas().clone() }),
                        Err(e) => out.events.push(engine_error(&e)),
                    }
                }
            }
            ClientEvent::Peek => match self.game.peek(self.human_role) {
                Ok(canvas) => out.events.push(ServerEvent::PeekResult { canvas }),
                Err(e) => out.events.push(engine_error(&e)),
            },
            ClientEvent::Finish => self.finish(&mut out),
        }
        out
    }

    fn human_chat(&mut self, text: String, out: &mut Outcome) {
        if let Err(e) = self.game.submit_message(self.human_role, &text) {
            out.events.push(engine_error(&e));
            return;
        }
        self.chat.push(ChatLine { role: self.human_role, text: text.clone() });
        out.events.push(ServerEvent::Chat { role: self.human_role, text: text.clone() });
        match self.human_role {
            Role::Teller => self.agent_drawer_turn(&text, out),
            Role::Drawer => self.agent_teller_turn(out),
        }
    }

    fn agent_drawer_turn(&mut self, text: &str, out: &mut Outcome) {
        let Opponent::Drawer(drawer) = self.opponent.clone() else { return };
        let message = Message::from_text(text);
        let round = self.game.rounds().len();
        let turn = drawer.act_in(&DrawerContext { scene_id: self.game.scene_id(), round, message: &message, canvas: self.game.canvas() });
        if !turn.action.is_empty() {
            // A rejected action leaves the canvas unchanged.
            let _ = self.game.submit_action(&turn.action);
        }
        let reply: String = turn.reply.chars().take(self.game.config().max_message_chars).collect();
        self.game.submit_message(Role::Drawer, &reply).expect("drawer turn after teller message");
        self.chat.push(ChatLine { role: Role::Drawer, text: reply.clone() });
        out.events.push(ServerEvent::Chat { role: Role::Drawer, text: reply });
    }

    fn agent_teller_turn(&mut self, out: &mut Outcome) {
        let Opponent::Teller(teller) = self.opponent.clone() else { return };
        let next = teller.next_message(self.game.target(), &self.teller_history);
        let Some(text) = next else {
            self.finish(out);
            return;
        };
        let text: String = text.chars().take(self.game.config().max_message_chars).collect();
        match self.game.submit_message(Role::Teller, &text) {
            Ok(()) => {
                self.teller_history.push(text.clone());
                self.chat.push(ChatLine { role: Role::Teller, text: text.clone() });
                out.events.push(ServerEvent::Chat { role: Role::Teller, text });
            }
            Err(_) => self.finish(out),
        }
    }

    fn finish(&mut self, out: &mut Outcome) {
        let Ok(mut t) = self.game.finish(self.human_role) else { return };
        let finished_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        t.duration = Some(self.started.elapsed().as_secs_f64());
        t.meta = Some(SessionMeta {
            session_id: self.id.clone(),
            human_role: self.human_role.to_string(),
            agent_kind: self.opponent.manifest().agent_kind.clone(),
            agent_id: self.agent_spec.clone(),
            finished_at,
        });
        out.events.push(ServerEvent::Finished {
            score: t.final_similarity.unwrap_or(0.0),
            rounds: t.rounds.len(),
            target: t.target.clone(),
            canvas: self.game.canvas().clone(),
        });
        out.transcript = Some(t);
    }
}

fn engine_error(e: &EngineError) -> ServerEvent {
    ServerEvent::error(e.code(), e.to_string())
}
