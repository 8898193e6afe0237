//! Live game service: HTTP endpoints to create sessions and list stored
//! transcripts, plus a JSON socket per session.
//!
//! | Method | Path | Body / query |
//! |---|---|---|
//! | `POST` | `/sessions` | [`CreateSession`] → [`SessionDescriptor`] |
//! | `GET` | `/sessions/{id}` | → [`SessionDescriptor`] |
//! | `GET` | `/sessions/{id}/socket` | socket of [`ClientEvent`] / [`ServerEvent`] |
//! | `GET` | `/transcripts` | [`TranscriptFilter`] query → transcripts |
//! | `GET` | `/library` | clip-art library |
//! | `GET` | `/healthz` | `ok` |

pub mod protocol;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::IteratorRandom;
use rand::RngCore;
use tokio::sync::Mutex;

pub use protocol::{ClientEvent, CreateSession, ServerEvent, SessionDescriptor, SessionState, PROTOCOL_VERSION};
pub use session::{Opponent, Outcome, Session};
pub use store::{TranscriptFilter, TranscriptStore};

use crate::agents::{AgentFactory, AgentSpec};
use crate::dataset::Partition;
use crate::engine::{GameConfig, Role};

pub struct AppState {
    factory: Arc<AgentFactory>,
    store: TranscriptStore,
    config: GameConfig,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(factory: Arc<AgentFactory>, store: TranscriptStore, config: GameConfig) -> Arc<Self> {
        Arc::new(AppState { factory, store, config, sessions: std::sync::Mutex::new(HashMap::new()) })
    }

    pub fn store(&self) -> &TranscriptStore {
        &self.store
    }

    fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.lock().expect("session table").get(id).cloned()
    }

    fn persist(&self, outcome: &Outcome) {
        if let Some(t) = &outcome.transcript {
            if let Err(e) = self.store.append(t) {
                tracing::error!(error = %e, scene = %t.scene_id, "failed to persist transcript");
            }
        }
    }

    /// Creates a session against the agent named in `req`.
    pub fn create_session(&self, req: &CreateSession) -> Result<(SessionDescriptor, Outcome), ApiError> {
        let spec: AgentSpec = req.agent.parse().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "unknown-agent", e))?;
        let corpus = self.factory.corpus();
        let scene_id = match &req.scene_id {
            Some(id) => id.clone(),
            None => self
                .factory
                .split()
                .get(Partition::Test)
                .iter()
                .choose(&mut rand::rng())
                .cloned()
                .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "unknown-scene", "test split is empty"))?,
        };
        let target = corpus
            .get(&scene_id)
            .map(|t| t.target.clone())
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-scene", format!("no scene {scene_id}")))?;
        let opponent = match req.human_role {
            Role::Drawer => Opponent::Teller(self.factory.teller(&spec, Some(&scene_id)).map_err(ApiError::agent)?),
            Role::Teller => Opponent::Drawer(self.factory.drawer(&spec).map_err(ApiError::agent)?),
        };
        let (session, outcome) = Session::new(new_session_id(), req.agent.clone(), opponent, &scene_id, target, self.config.clone())
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.code(), e))?;
        self.persist(&outcome);
        let desc = session.descriptor();
        self.sessions.lock().expect("session table").insert(desc.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok((desc, outcome))
    }
}

/// 128 random bits, hex encoded.
fn new_session_id() -> String {
    let mut b = [0u8; 16];
    rand::rng().fill_bytes(&mut b);
    hex::encode(b)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        ApiError { status, code: code.to_owned(), message: message.to_string() }
    }

    fn agent(e: crate::agents::registry::RegistryError) -> Self {
        use crate::agents::registry::RegistryError as R;
        let code = match e {
            R::UnknownScene(_) => "unknown-scene",
            _ => "unknown-agent",
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e)
    }

    pub fn code(&self) -> &str {
        &self.code
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ServerEvent::error(&self.code, self.message))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/library", get(library))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(describe))
        .route("/sessions/{id}/socket", get(socket))
        .route("/transcripts", get(transcripts))
        .with_state(state)
}

async fn library() -> impl IntoResponse {
    ([("content-type", "application/json")], crate::library::LIBRARY_JSON)
}

async fn create(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> Result<Json<SessionDescriptor>, ApiError> {
    let app2 = Arc::clone(&app);
    let (desc, _) = tokio::task::spawn_blocking(move || app2.create_session(&req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))??;
    Ok(Json(desc))
}

async fn describe(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionDescriptor>, ApiError> {
    let s = app.session(&id).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-session", "no such session"))?;
    let d = s.lock().await.descriptor();
    Ok(Json(d))
}

async fn transcripts(State(app): State<Arc<AppState>>, Query(filter): Query<TranscriptFilter>) -> Result<Response, ApiError> {
    let list = app.store.list(&filter).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e))?;
    Ok(Json(list).into_response())
}

async fn socket(State(app): State<Arc<AppState>>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Result<Response, ApiError> {
    let s = app.session(&id).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-session", "no such session"))?;
    Ok(ws.on_upgrade(move |socket| run_socket(app, s, socket)))
}

async fn send(socket: &mut WebSocket, ev: &ServerEvent) -> bool {
    let text = serde_json::to_string(ev).expect("event serializes");
    socket.send(WsMessage::Text(text.into())).await.is_ok()
}

async fn run_socket(app: Arc<AppState>, session: Arc<Mutex<Session>>, mut socket: WebSocket) {
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            WsMessage::Text(t) => t,
            WsMessage::Close(_) => break,
            _ => continue,
        };
        let events = match serde_json::from_str::<ClientEvent>(&text) {
            Ok(ev) => {
                let mut s = session.lock().await;
                let outcome = s.handle(ev);
                app.persist(&outcome);
                outcome.events
            }
            Err(e) => vec![ServerEvent::error("bad-request", e.to_string())],
        };
        for ev in &events {
            if !send(&mut socket, ev).await {
                return;
            }
        }
    }
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::official::{import_release, ImportOptions};
    use crate::dataset::synth::{generate_release, SynthConfig};
    use crate::scene::{DrawerAction, Scene};

    fn app(dir: &std::path::Path) -> Arc<AppState> {
        let cfg = SynthConfig { train: 20, val: 3, test: 3, ..SynthConfig::default() };
        let corpus = import_release(&generate_release(&cfg), &ImportOptions::default()).unwrap().0;
        let split = crate::dataset::split_crosstalk(&corpus, true, 0);
        let factory = AgentFactory::new(Arc::new(corpus), Arc::new(split), None);
        AppState::new(Arc::new(factory), TranscriptStore::new(dir.join("t.jsonl")), GameConfig::default())
    }

    fn session(app: &AppState, role: Role, agent: &str) -> Arc<Mutex<Session>> {
        let (d, _) = app.create_session(&CreateSession { human_role: role, agent: agent.into(), scene_id: None }).unwrap();
        app.session(&d.session_id).unwrap()
    }

    fn no_target(ev: &ServerEvent) -> bool {
        !matches!(ev, ServerEvent::State { target: Some(_), .. } | ServerEvent::Finished { .. })
    }

    #[tokio::test]
    async fn human_teller_gets_acks_and_one_peek() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path());
        let s = session(&app, Role::Teller, "rb:drawer_train");
        let mut s = s.lock().await;
        let joined = s.handle(ClientEvent::Join).events;
        assert!(matches!(&joined[0], ServerEvent::State { target: Some(_), canvas: None, .. }));
        let out = s.handle(ClientEvent::Chat { text: "a big sun top left".into() }).events;
        assert_eq!(out[1], ServerEvent::Chat { role: Role::Drawer, text: "ok".into() });
        assert!(matches!(s.handle(ClientEvent::Peek).events[0], ServerEvent::PeekResult { .. }));
        match &s.handle(ClientEvent::Peek).events[0] {
            ServerEvent::Error { code, .. } => assert_eq!(code, "peek-exhausted"),
            e => panic!("{e:?}"),
        }
        let fin = s.handle(ClientEvent::Finish);
        let t = fin.transcript.unwrap();
        assert_eq!(crate::engine::replay(&t).unwrap().final_canvas(), s.canvas());
        app.persist(&Outcome { events: vec![], transcript: Some(t) });
        assert_eq!(app.store().list(&TranscriptFilter::default()).unwrap().len(), 1);
    }

    #[tokio::test]
    async fn human_drawer_never_sees_target_until_finished() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path());
        let s = session(&app, Role::Drawer, "rb:teller_train");
        let mut s = s.lock().await;
        let mut events = s.handle(ClientEvent::Join).events;
        assert!(matches!(&events[0], ServerEvent::State { target: None, canvas: Some(_), turn: Role::Drawer, .. }));
        let mut finished = None;
        for _ in 0..60 {
            let sun = crate::scene::ClipArtPiece::object(
                crate::scene::ClipArtTypeId::new(0).unwrap(),
                crate::scene::Flip::FaceLeft,
                crate::scene::Size::Normal,
                0.5,
                0.1,
            );
            let action = if s.canvas().contains(sun.kind) { DrawerAction::default() } else { DrawerAction::add(sun) };
            events.extend(s.handle(ClientEvent::Action { action }).events);
            let out = s.handle(ClientEvent::Chat { text: "ok".into() });
            events.extend(out.events.iter().cloned());
            if out.transcript.is_some() {
                finished = out.transcript;
                break;
            }
        }
        let t = finished.expect("rb teller stops after one message per piece");
        let last = events.pop().unwrap();
        assert!(matches!(last, ServerEvent::Finished { .. }));
        assert!(events.iter().all(no_target), "target leaked before the end");
        assert_eq!(t.meta.as_ref().unwrap().human_role, "drawer");
        let json: Vec<String> = events.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
        assert!(json.iter().all(|j| !j.contains("\"target\"")));
        let _ = Scene::new();
    }

    #[test]
    fn bad_agent_and_scene_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path());
        let err = app.create_session(&CreateSession { human_role: Role::Teller, agent: "bogus".into(), scene_id: None }).unwrap_err();
        assert_eq!(err.code(), "unknown-agent");
        let err =
            app.create_session(&CreateSession { human_role: Role::Teller, agent: "noop".into(), scene_id: Some("x".into()) }).unwrap_err();
        assert_eq!(err.code(), "unknown-scene");
        let err = app.create_session(&CreateSession { human_role: Role::Drawer, agent: "noop".into(), scene_id: None }).unwrap_err();
        assert_eq!(err.code(), "unknown-agent");
    }
}
