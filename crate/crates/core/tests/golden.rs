use std::path::PathBuf;

use codraw::dataset::DialogTranscript;
use codraw::engine::replay;
use codraw::metric::similarity;
use codraw::service::{ClientEvent, CreateSession, ServerEvent, SessionDescriptor};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

fn sample(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/samples").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Parses `text` as `T` and checks that serializing it back yields the same JSON.
fn round_trip<T: DeserializeOwned + Serialize>(text: &str) -> T {
    let parsed: T = serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"));
    let raw: Value = serde_json::from_str(text).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), raw);
    parsed
}

#[test]
fn socket_samples_match_the_wire_format() {
    let client: Vec<ClientEvent> = sample("client_events.jsonl").lines().map(round_trip).collect();
    assert_eq!(client.len(), 6);
    let server: Vec<ServerEvent> = sample("server_events.jsonl").lines().map(round_trip).collect();
    assert_eq!(server.len(), 7);
    let ServerEvent::State { target: Some(_), canvas: None, .. } = &server[0] else { panic!("teller view carries only the target") };
    let ServerEvent::State { target: None, canvas: Some(_), .. } = &server[1] else { panic!("drawer view carries only the canvas") };
    let ServerEvent::Finished { score, target, canvas, .. } = &server[6] else { panic!("last sample is the final score") };
    assert_eq!(*score, similarity(target, canvas));
}

#[test]
fn session_samples_match_the_http_format() {
    let req: CreateSession = round_trip(sample("create_session.json").trim());
    let desc: SessionDescriptor = round_trip(sample("session_descriptor.json").trim());
    assert_eq!(req.scene_id.as_deref(), Some(desc.scene_id.as_str()));
}

#[test]
fn transcript_sample_replays() {
    let text = sample("transcript.jsonl");
    let t: DialogTranscript = round_trip(text.trim());
    let r = replay(&t).unwrap();
    assert!(r.mismatches.is_empty());
    assert_eq!(r.final_canvas(), &t.rounds.last().unwrap().canvas_after);
}
