mod common;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use codraw::agents::AgentFactory;
use codraw::dataset::synth::SynthConfig;
use codraw::dataset::{split_crosstalk, DialogTranscript, Partition};
use codraw::engine::{replay, GameConfig, Role};
use codraw::metric::similarity;
use codraw::scene::{ClipArtPiece, ClipArtTypeId, DrawerAction, Flip, Scene, Size};
use codraw::service::{router, AppState, ClientEvent, ServerEvent, TranscriptStore};
use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>;

struct Server {
    addr: SocketAddr,
    test_scene: String,
    _dir: tempfile::TempDir,
}

async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::synthetic_corpus(&SynthConfig { train: 60, val: 5, test: 5, seed: 4, ..SynthConfig::default() });
    let split = split_crosstalk(&corpus, true, 0);
    let test_scene = split.get(Partition::Test).iter().next().unwrap().clone();
    let factory = AgentFactory::new(Arc::new(corpus), Arc::new(split), None);
    let state = AppState::new(Arc::new(factory), TranscriptStore::new(dir.path().join("sessions.jsonl")), GameConfig::default());
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    Server { addr, test_scene, _dir: dir }
}

/// Minimal HTTP/1.1 client: returns the status code and body.
async fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let body = body.unwrap_or("");
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await.unwrap();
    let text = String::from_utf8(raw).unwrap();
    let (head, rest) = text.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = if head.to_ascii_lowercase().contains("transfer-encoding: chunked") { dechunk(rest) } else { rest.to_owned() };
    (status, body)
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    loop {
        let (len, rest) = s.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(len.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
}

async fn create(addr: SocketAddr, role: &str, agent: &str, scene: &str) -> Value {
    let body = format!(r#"{{"human_role":"{role}","agent":"{agent}","scene_id":"{scene}"}}"#);
    let (status, text) = http(addr, "POST", "/sessions", Some(&body)).await;
    assert_eq!(status, 200, "{text}");
    serde_json::from_str(&text).unwrap()
}

async fn connect(addr: SocketAddr, id: &str) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/socket")).await.unwrap();
    ws
}

async fn send(ws: &mut Ws, ev: &ClientEvent) {
    ws.send(Message::Text(serde_json::to_string(ev).unwrap().into())).await.unwrap();
}

/// Next server event, with the raw JSON for payload assertions.
async fn recv(ws: &mut Ws) -> (ServerEvent, Value) {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("server reply").unwrap().unwrap();
        if let Message::Text(t) = msg {
            let raw: Value = serde_json::from_str(&t).unwrap();
            return (serde_json::from_value(raw.clone()).unwrap(), raw);
        }
    }
}

fn some_piece(canvas: &Scene) -> Option<ClipArtPiece> {
    ClipArtTypeId::all()
        .filter(|k| !k.is_human() && !canvas.contains(*k))
        .map(|k| ClipArtPiece::object(k, Flip::FaceLeft, Size::Normal, 0.4, 0.6))
        .next()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn human_drawer_completes_game_without_seeing_target() {
    let server = start().await;
    let desc = create(server.addr, "drawer", "rb:teller_train", &server.test_scene).await;
    assert_eq!(desc["agent"]["agent_kind"], "rb-teller");
    let id = desc["session_id"].as_str().unwrap().to_owned();
    assert_eq!(id.len(), 32);

    let mut ws = connect(server.addr, &id).await;
    send(&mut ws, &ClientEvent::Join).await;
    let (state, raw) = recv(&mut ws).await;
    assert!(raw.get("target").is_none(), "drawer state must not carry the target: {raw}");
    let ServerEvent::State { role: Role::Drawer, chat, canvas: Some(mut canvas), .. } = state else { panic!("{raw}") };
    assert_eq!(chat.len(), 1, "the agent teller opens the dialog");

    let (score, final_canvas) = loop {
        if let Some(p) = some_piece(&canvas) {
            send(&mut ws, &ClientEvent::Action { action: DrawerAction::add(p) }).await;
            let (ev, raw) = recv(&mut ws).await;
            let ServerEvent::ActionApplied { canvas: c } = ev else { panic!("{raw}") };
            canvas = c;
        }
        send(&mut ws, &ClientEvent::Chat { text: "ok".into() }).await;
        let (echo, _) = recv(&mut ws).await;
        assert_eq!(echo, ServerEvent::Chat { role: Role::Drawer, text: "ok".into() });
        let (ev, raw) = recv(&mut ws).await;
        match ev {
            ServerEvent::Chat { role: Role::Teller, .. } => assert!(raw.get("target").is_none()),
            ServerEvent::Finished { score, canvas, .. } => break (score, canvas),
            other => panic!("unexpected {other:?}"),
        }
    };

    let (status, body) = http(server.addr, "GET", &format!("/transcripts?scene_id={}&human_role=drawer", server.test_scene), None).await;
    assert_eq!(status, 200);
    let stored: Vec<DialogTranscript> = serde_json::from_str(&body).unwrap();
    assert_eq!(stored.len(), 1);
    let t = &stored[0];
    let r = replay(t).unwrap();
    assert!(r.mismatches.is_empty());
    assert_eq!(r.final_canvas(), &final_canvas);
    assert_eq!(t.final_similarity, Some(score));
    assert_eq!(similarity(&t.target, r.final_canvas()), score);
    assert_eq!(t.meta.as_ref().unwrap().agent_id, "rb:teller_train");

    let (status, body) = http(server.addr, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["state"], "finished");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn human_teller_peeks_once_and_is_capped() {
    let server = start().await;
    let desc = create(server.addr, "teller", "rb:drawer_train", &server.test_scene).await;
    let id = desc["session_id"].as_str().unwrap().to_owned();
    let mut ws = connect(server.addr, &id).await;

    send(&mut ws, &ClientEvent::Join).await;
    let (state, raw) = recv(&mut ws).await;
    let ServerEvent::State { target: Some(target), peek_available: true, .. } = state else { panic!("{raw}") };
    assert!(raw.get("canvas").is_none());
    assert!(!target.is_empty());

    send(&mut ws, &ClientEvent::Chat { text: "x".repeat(141) }).await;
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Error { code, .. } if code == "over-length"));

    send(&mut ws, &ClientEvent::Chat { text: "a big sun in the top left".into() }).await;
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Chat { role: Role::Teller, .. }));
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Chat { role: Role::Drawer, .. }));

    send(&mut ws, &ClientEvent::Action { action: DrawerAction::default() }).await;
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Error { code, .. } if code == "action-not-allowed"));

    send(&mut ws, &ClientEvent::Peek).await;
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::PeekResult { .. }));
    send(&mut ws, &ClientEvent::Peek).await;
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Error { code, .. } if code == "peek-exhausted"));

    ws.send(Message::Text("{\"kind\":\"dance\"}".into())).await.unwrap();
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Error { code, .. } if code == "bad-request"));

    send(&mut ws, &ClientEvent::Finish).await;
    let (ev, _) = recv(&mut ws).await;
    let ServerEvent::Finished { rounds, .. } = ev else { panic!("{ev:?}") };
    assert_eq!(rounds, 1);
    send(&mut ws, &ClientEvent::Chat { text: "more".into() }).await;
    assert!(matches!(recv(&mut ws).await.0, ServerEvent::Error { code, .. } if code == "session-finished"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_requests_get_error_codes() {
    let server = start().await;
    let (status, body) = http(server.addr, "POST", "/sessions", Some(r#"{"human_role":"drawer","agent":"bogus"}"#)).await;
    assert_eq!(status, 400);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!((v["kind"].as_str(), v["code"].as_str()), (Some("error"), Some("unknown-agent")));

    let (status, body) = http(server.addr, "POST", "/sessions", Some(r#"{"human_role":"teller","agent":"noop","scene_id":"nope"}"#)).await;
    assert_eq!(status, 404, "{body}");

    let (status, _) = http(server.addr, "GET", "/sessions/0123", None).await;
    assert_eq!(status, 404);

    let (status, body) = http(server.addr, "GET", "/healthz", None).await;
    assert_eq!((status, body.as_str()), (200, "ok"));

    let (status, body) = http(server.addr, "GET", "/library", None).await;
    assert_eq!(status, 200);
    let lib: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(lib["types"].as_array().unwrap().len(), 58);
}
