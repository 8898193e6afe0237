//! Adapter for the public release format.
//!
//! A release directory holds one or more `*.json` files shaped like
//! `{"data": {"<split>_<nnnnn>": {"abs_t": ..., "dialog": [...]}}}`. Scenes are
//! encoded as comma-separated strings: a piece count followed by eight fields
//! per piece (`png, local_index, type_index, subtype, x, y, depth, flip`) with
//! pixel coordinates. Humans encode `expression * 7 + pose` in `subtype`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Corpus, DatasetError, DialogTranscript, Message, ReplayMismatch, RoundRecord};
use crate::library::{library, CanvasSize};
use crate::scene::{ClipArtPiece, ClipArtTypeId, DrawerAction, Flip, Scene, Size, NUM_POSES};

const FIELDS_PER_PIECE: usize = 8;
/// Coordinates at or below this mark palette pieces that were never placed.
const UNPLACED_SENTINEL: f64 = -1000.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReleaseFile {
    pub data: BTreeMap<String, ReleaseDialog>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReleaseDialog {
    pub abs_t: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<u64>,
    pub dialog: Vec<ReleaseRound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReleaseRound {
    /// Canvas before the drawer's edits in this round, when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_b: Option<String>,
    /// Canvas after the drawer's edits.
    pub abs_d: String,
    #[serde(default)]
    pub msg_t: String,
    #[serde(default)]
    pub msg_d: String,
    #[serde(default)]
    pub peeked: bool,
}

#[derive(Debug, Clone)]
pub struct ImportOptions {
    pub canvas: CanvasSize,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions { canvas: library().canvas }
    }
}

/// Everything needed to audit an import.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportManifest {
    pub source_files: Vec<String>,
    pub canvas: CanvasSize,
    pub dialogs: usize,
    pub rounds: usize,
    pub unplaced_pieces_skipped: usize,
    pub duplicate_pieces_dropped: usize,
    /// Rounds whose recorded snapshot differs from the previous snapshot plus
    /// the round's edits.
    pub replay_anomalies: Vec<ReplayMismatch>,
    pub replay_match_rate: f64,
    pub corpus_fingerprint: String,
}

#[derive(Default)]
struct Counters {
    unplaced: usize,
    duplicates: usize,
}

pub fn parse_scene_string(s: &str, canvas: CanvasSize) -> Result<Scene, String> {
    parse_scene_counted(s, canvas, &mut Counters::default())
}

fn parse_scene_counted(s: &str, canvas: CanvasSize, counters: &mut Counters) -> Result<Scene, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Scene::new());
    }
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    let declared: usize = fields[0].parse().map_err(|_| format!("bad piece count {:?}", fields[0]))?;
    let body = &fields[1..];
    if body.len() != declared * FIELDS_PER_PIECE {
        return Err(format!("piece count {declared} needs {} fields, found {}", declared * FIELDS_PER_PIECE, body.len()));
    }
    let mut scene = Scene::new();
    for chunk in body.chunks(FIELDS_PER_PIECE) {
        let int = |i: usize| chunk[i].parse::<i64>().map_err(|_| format!("bad integer {:?}", chunk[i]));
        let real = |i: usize| chunk[i].parse::<f64>().map_err(|_| format!("bad number {:?}", chunk[i]));
        let idx = int(2)?;
        let kind = u8::try_from(idx).ok().and_then(ClipArtTypeId::new).ok_or_else(|| format!("type index {idx} out of range"))?;
        let subtype = int(3)?;
        let (px, py) = (real(4)?, real(5)?);
        if px <= UNPLACED_SENTINEL || py <= UNPLACED_SENTINEL {
            counters.unplaced += 1;
            continue;
        }
        let size = match int(6)? {
            0 => Size::Large,
            1 => Size::Normal,
            2 => Size::Small,
            d => return Err(format!("depth {d} out of range")),
        };
        let flip = match int(7)? {
            0 => Flip::FaceLeft,
            1 => Flip::FaceRight,
            f => return Err(format!("flip {f} out of range")),
        };
        let (x, y) = (px / canvas.width, py / canvas.height);
        let piece = if kind.is_human() {
            if !(0..35).contains(&subtype) {
                return Err(format!("human subtype {subtype} out of range"));
            }
            let sub = subtype as u8;
            ClipArtPiece::human(kind, flip, size, sub % NUM_POSES, sub / NUM_POSES, x, y)
        } else {
            ClipArtPiece::object(kind, flip, size, x, y)
        };
        if scene.contains(kind) {
            counters.duplicates += 1;
            continue;
        }
        scene.upsert(piece);
    }
    Ok(scene)
}

/// Inverse of [`parse_scene_string`] up to pixel rounding (3 decimals).
pub fn format_scene_string(scene: &Scene, canvas: CanvasSize) -> String {
    let mut out = scene.len().to_string();
    for (local, p) in scene.pieces().enumerate() {
        let subtype = match (p.pose, p.expression) {
            (Some(pose), Some(expr)) => expr * NUM_POSES + pose,
            _ => 0,
        };
        let depth = match p.size {
            Size::Large => 0,
            Size::Normal => 1,
            Size::Small => 2,
        };
        let px = (p.x * canvas.width * 1000.0).round() / 1000.0;
        let py = (p.y * canvas.height * 1000.0).round() / 1000.0;
        out.push_str(&format!(
            ",{},{},{},{},{},{},{},{}",
            p.kind.info().asset.rsplit('/').next().unwrap_or(""),
            local,
            p.kind.get(),
            subtype,
            px,
            py,
            depth,
            p.flip.index()
        ));
    }
    out
}

fn release_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let entries = fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(DatasetError::NoCorpus(dir.to_path_buf()));
    }
    Ok(files)
}

/// Imports every `*.json` release file under `dir`.
pub fn import_official(dir: &Path, opts: &ImportOptions) -> Result<(Corpus, ImportManifest), DatasetError> {
    let mut releases = Vec::new();
    for path in release_files(dir)? {
        let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        let release: ReleaseFile = serde_json::from_str(&text).map_err(|e| DatasetError::Schema {
            path: path.clone(),
            record: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        releases.push((path, release));
    }
    import_parsed(&releases, opts)
}

/// Imports a release already held in memory.
pub fn import_release(release: &ReleaseFile, opts: &ImportOptions) -> Result<(Corpus, ImportManifest), DatasetError> {
    import_parsed(&[(PathBuf::from("<memory>"), release.clone())], opts)
}

fn import_parsed(files: &[(PathBuf, ReleaseFile)], opts: &ImportOptions) -> Result<(Corpus, ImportManifest), DatasetError> {
    let mut transcripts = Vec::new();
    let mut counters = Counters::default();
    for (path, release) in files {
        for (key, dialog) in &release.data {
            let t = convert_dialog(key, dialog, opts.canvas, &mut counters).map_err(|message| DatasetError::Schema {
                path: path.clone(),
                record: key.clone(),
                message,
            })?;
            transcripts.push(t);
        }
    }
    let corpus = Corpus::new(transcripts);

    let mut anomalies = Vec::new();
    let mut rounds = 0;
    for t in corpus.transcripts() {
        rounds += t.rounds.len();
        anomalies.extend(crate::engine::local_replay_mismatches(t));
    }
    let manifest = ImportManifest {
        source_files: files.iter().map(|(p, _)| p.display().to_string()).collect(),
        canvas: opts.canvas,
        dialogs: corpus.len(),
        rounds,
        unplaced_pieces_skipped: counters.unplaced,
        duplicate_pieces_dropped: counters.duplicates,
        replay_match_rate: if rounds == 0 { 1.0 } else { 1.0 - anomalies.len() as f64 / rounds as f64 },
        replay_anomalies: anomalies,
        corpus_fingerprint: corpus.fingerprint(),
    };
    Ok((corpus, manifest))
}

fn convert_dialog(key: &str, d: &ReleaseDialog, canvas: CanvasSize, counters: &mut Counters) -> Result<DialogTranscript, String> {
    let target = parse_scene_counted(&d.abs_t, canvas, counters).map_err(|e| format!("abs_t: {e}"))?;
    let mut t = DialogTranscript::new(key, target);
    t.duration = d.duration;
    t.official_split = key.split_once('_').map(|(s, _)| s.to_owned());
    let mut prev = Scene::new();
    for (i, r) in d.dialog.iter().enumerate() {
        let after = parse_scene_counted(&r.abs_d, canvas, counters).map_err(|e| format!("round {i} abs_d: {e}"))?;
        let before = match &r.abs_b {
            Some(b) => parse_scene_counted(b, canvas, counters).map_err(|e| format!("round {i} abs_b: {e}"))?,
            None => prev.clone(),
        };
        let diff = DrawerAction::diff(&before, &after);
        let mut removed = diff.removes;
        removed.extend(diff.edits.iter().map(|p| p.kind));
        let mut added = diff.edits;
        added.extend(diff.adds);
        t.rounds.push(RoundRecord {
            index: i,
            teller: Message::from_text(r.msg_t.as_str()),
            drawer: Message::from_text(r.msg_d.as_str()),
            removed,
            added,
            canvas_after: after.clone(),
            peek: r.peeked,
        });
        prev = after;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANVAS: CanvasSize = CanvasSize { width: 500.0, height: 400.0 };

    #[test]
    fn parses_objects_and_humans() {
        let s = "2,s_0s.png,0,0,0,250,40,2,0,hb0_10s.png,1,18,10,100,300,0,1";
        let scene = parse_scene_string(s, CANVAS).unwrap();
        assert_eq!(scene.len(), 2);
        let sun = scene.get(ClipArtTypeId::new(0).unwrap()).unwrap();
        assert_eq!((sun.x, sun.y, sun.size, sun.flip), (0.5, 0.1, Size::Small, Flip::FaceLeft));
        let mike = scene.get(ClipArtTypeId::new(18).unwrap()).unwrap();
        assert_eq!((mike.pose, mike.expression), (Some(3), Some(1)));
        assert_eq!((mike.size, mike.flip), (Size::Large, Flip::FaceRight));
    }

    #[test]
    fn rejects_bad_field_count() {
        assert!(parse_scene_string("1,s_0s.png,0,0", CANVAS).is_err());
        assert!(parse_scene_string("1,s.png,0,99,0,1,1,0,0", CANVAS).is_err());
    }

    #[test]
    fn skips_unplaced_palette_pieces() {
        let s = "1,s_0s.png,0,0,0,-10000,-10000,0,0";
        assert!(parse_scene_string(s, CANVAS).unwrap().is_empty());
        assert!(parse_scene_string("", CANVAS).unwrap().is_empty());
        assert!(parse_scene_string("0", CANVAS).unwrap().is_empty());
    }

    #[test]
    fn format_then_parse_round_trips_pixel_grid() {
        let s = "2,00_sun.png,0,0,0,250,40,2,0,18_mike.png,1,18,10,100,300,0,1";
        let scene = parse_scene_string(s, CANVAS).unwrap();
        assert_eq!(format_scene_string(&scene, CANVAS), s);
    }

    #[test]
    fn empty_directory_is_no_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let err = import_official(dir.path(), &ImportOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::NoCorpus(_)));
    }

    #[test]
    fn schema_error_names_first_bad_record() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("r.json"),
            r#"{"data": {"train_00000": {"abs_t": "0", "dialog": []},
                         "train_00001": {"abs_t": "1,x", "dialog": []}}}"#,
        )
        .unwrap();
        match import_official(dir.path(), &ImportOptions::default()).unwrap_err() {
            DatasetError::Schema { record, .. } => assert_eq!(record, "train_00001"),
            e => panic!("unexpected {e}"),
        }
    }
}
