//! Deterministic synthetic dialogs in the release format.
//!
//! Used for tests, demos and smoke runs when the real corpus is not at hand.
//! Scenes follow the sky / scenery / people / small-item layout of the real
//! scenes; tellers describe one or two pieces per round in a per-dialog
//! phrasing style and drawers place what was described with some noise.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::official::{format_scene_string, ReleaseDialog, ReleaseFile, ReleaseRound};
use super::DatasetError;
use crate::library::{library, CanvasSize};
use crate::scene::{ClipArtPiece, ClipArtTypeId, Flip, Scene, Size, NUM_EXPRESSIONS, NUM_POSES};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    /// Probability that a round's recorded "before" canvas disagrees with the
    /// previous round's snapshot.
    pub anomaly_rate: f64,
    /// In `[0, 1]`; scales the drawer's placement jitter and attribute mistakes. 0 gives
    /// exact copies.
    pub drawer_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { train: 800, val: 100, test: 100, seed: 0, anomaly_rate: 0.01, drawer_noise: 1.0 }
    }
}

const EXPRESSIONS: [&str; 5] = ["happy", "sad", "angry", "surprised", "scared"];
const POSES: [&str; 7] = ["standing", "sitting", "running", "waving", "kicking", "jumping", "crouching"];
const REPLIES: [(&str, u32); 9] = [
    ("ok", 40),
    ("done", 10),
    ("okay", 8),
    ("next", 4),
    ("got it", 10),
    ("ready for more", 4),
    ("what size is it ?", 4),
    ("where exactly ?", 4),
    ("", 6),
];
const CLOSINGS: [&str; 4] = ["that is it", "that's all , thanks", "all done , great job", "i think we are finished"];

fn name_words(kind: ClipArtTypeId) -> String {
    kind.name().replace('_', " ")
}

fn size_word(size: Size, style: usize) -> &'static str {
    match (size, style % 2) {
        (Size::Small, 0) => "small",
        (Size::Small, _) => "little",
        (Size::Normal, 0) => "medium",
        (Size::Normal, _) => "regular size",
        (Size::Large, 0) => "big",
        (Size::Large, _) => "large",
    }
}

fn facing_word(flip: Flip) -> &'static str {
    match flip {
        Flip::FaceLeft => "left",
        Flip::FaceRight => "right",
    }
}

fn region_words(x: f64, y: f64) -> String {
    let h = if x < 0.33 {
        "left"
    } else if x < 0.66 {
        "center"
    } else {
        "right"
    };
    let v = if y < 0.33 {
        "top"
    } else if y < 0.66 {
        "middle"
    } else {
        "bottom"
    };
    if v == "middle" && h == "center" {
        "center".into()
    } else {
        format!("{v} {h}")
    }
}

fn describe(p: &ClipArtPiece, style: usize) -> String {
    let name = name_words(p.kind);
    let size = size_word(p.size, style);
    let face = facing_word(p.flip);
    let region = region_words(p.x, p.y);
    let human = match (p.pose, p.expression) {
        (Some(pose), Some(e)) => format!(" , {} and {}", EXPRESSIONS[e as usize], POSES[pose as usize]),
        _ => String::new(),
    };
    match style {
        0 => format!("{size} {name} {region} facing {face}{human}"),
        1 => format!("there is a {size} {name} in the {region} , it faces {face}{human}"),
        2 => format!("{region} is a {name} , {size} , pointing {face}{human}"),
        _ => format!("put a {size} {name} at {region} looking {face}{human}"),
    }
}

fn cap_140(text: String) -> String {
    if text.chars().count() <= 140 {
        return text;
    }
    let mut out = String::new();
    for tok in text.split_whitespace() {
        if out.chars().count() + tok.chars().count() + 1 > 140 {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

fn random_size(rng: &mut ChaCha8Rng) -> Size {
    match rng.random_range(0..4) {
        0 => Size::Small,
        1 => Size::Large,
        _ => Size::Normal,
    }
}

fn random_piece(rng: &mut ChaCha8Rng, kind: ClipArtTypeId, y_range: (f64, f64)) -> ClipArtPiece {
    let canvas = library().canvas;
    // Pixel-grid coordinates, as in the release.
    let px = rng.random_range(10..=490) as f64;
    let py = (rng.random_range(y_range.0..y_range.1) * canvas.height).round();
    let (x, y) = (px / canvas.width, py / canvas.height);
    let flip = if rng.random_bool(0.5) { Flip::FaceLeft } else { Flip::FaceRight };
    let size = random_size(rng);
    if kind.is_human() {
        let pose = rng.random_range(0..NUM_POSES);
        let expr = rng.random_range(0..NUM_EXPRESSIONS);
        ClipArtPiece::human(kind, flip, size, pose, expr, x, y)
    } else {
        ClipArtPiece::object(kind, flip, size, x, y)
    }
}

fn pick_types(rng: &mut ChaCha8Rng, category: &[&str], k: usize) -> Vec<ClipArtTypeId> {
    let pool: Vec<ClipArtTypeId> = ClipArtTypeId::all().filter(|t| category.contains(&t.info().category.as_str())).collect();
    pool.choose_multiple(rng, k).copied().collect()
}

pub fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let mut pieces = Vec::new();
    let k = rng.random_range(1..=2);
    for t in pick_types(rng, &["sky"], k) {
        pieces.push(random_piece(rng, t, (0.03, 0.3)));
    }
    let k = rng.random_range(1..=2);
    for t in pick_types(rng, &["scenery"], k) {
        pieces.push(random_piece(rng, t, (0.35, 0.65)));
    }
    let people = match rng.random_range(0..4) {
        0 => vec!["mike"],
        1 => vec!["jenny"],
        _ => vec!["mike", "jenny"],
    };
    for name in people {
        let kind = ClipArtTypeId::by_name(name).expect("human in library");
        pieces.push(random_piece(rng, kind, (0.5, 0.85)));
    }
    let k = rng.random_range(0..=1);
    for t in pick_types(rng, &["animal"], k) {
        pieces.push(random_piece(rng, t, (0.6, 0.92)));
    }
    let small = rng.random_range(1..=3).max(6usize.saturating_sub(pieces.len()));
    for t in pick_types(rng, &["clothing", "food", "toy"], small) {
        pieces.push(random_piece(rng, t, (0.4, 0.95)));
    }
    Scene::from_pieces(pieces).expect("distinct types")
}

fn noisy_copy(rng: &mut ChaCha8Rng, p: &ClipArtPiece, noise: f64) -> ClipArtPiece {
    let canvas = library().canvas;
    let mut q = *p;
    let jitter = |rng: &mut ChaCha8Rng, v: f64, extent: f64| {
        let dv: f64 = rng.random_range(-0.08..0.08) * noise;
        ((v + dv).clamp(0.0, 1.0) * extent).round() / extent
    };
    q.x = jitter(rng, p.x, canvas.width);
    q.y = jitter(rng, p.y, canvas.height);
    if rng.random_bool(0.1 * noise) {
        q.size = random_size(rng);
    }
    if rng.random_bool(0.1 * noise) {
        q.flip = if q.flip == Flip::FaceLeft { Flip::FaceRight } else { Flip::FaceLeft };
    }
    if q.is_human() && rng.random_bool(0.3 * noise) {
        q.pose = Some(rng.random_range(0..NUM_POSES));
    }
    if q.is_human() && rng.random_bool(0.3 * noise) {
        q.expression = Some(rng.random_range(0..NUM_EXPRESSIONS));
    }
    q
}

fn reply(rng: &mut ChaCha8Rng) -> String {
    REPLIES.choose_weighted(rng, |r| r.1).expect("nonempty").0.to_owned()
}

fn generate_dialog(rng: &mut ChaCha8Rng, canvas: CanvasSize, anomaly_rate: f64, noise: f64) -> ReleaseDialog {
    let target = random_scene(rng);
    let style = rng.random_range(0..4);
    let mut keyed: Vec<_> = target.pieces().map(|p| ((p.kind.info().teller_stratum, rng.random_range(0..3u8), p.kind), p)).collect();
    keyed.sort_by_key(|(k, _)| *k);
    let order: Vec<&ClipArtPiece> = keyed.into_iter().map(|(_, p)| p).collect();
    let mut rounds = Vec::new();
    let mut canvas_now = Scene::new();
    let fmt = |s: &Scene| format_scene_string(s, canvas);

    let mut i = 0;
    while i < order.len() {
        let take = if rng.random_bool(0.25) && i + 1 < order.len() { 2 } else { 1 };
        let chunk = &order[i..i + take];
        i += take;
        let text = chunk.iter().map(|p| describe(p, style)).collect::<Vec<_>>().join(" . ");
        let before = canvas_now.clone();
        for p in chunk {
            if rng.random_bool(1.0 - 0.04 * noise) {
                canvas_now.upsert(noisy_copy(rng, p, noise));
            }
        }
        let mut abs_b = fmt(&before);
        if rng.random_bool(anomaly_rate) {
            if let Some(first) = before.pieces().next().map(|p| p.kind) {
                let mut dropped = before.clone();
                dropped.remove(first);
                abs_b = fmt(&dropped);
            }
        }
        rounds.push(ReleaseRound { abs_b: Some(abs_b), abs_d: fmt(&canvas_now), msg_t: cap_140(text), msg_d: reply(rng), peeked: false });
    }

    // A peek-and-fix round for some dialogs: move the worst-placed piece.
    if rng.random_bool(0.3) {
        let worst = target.pieces().filter_map(|t| canvas_now.get(t.kind).map(|c| (t, c))).max_by(|a, b| {
            let da = (a.0.x - a.1.x).hypot(a.0.y - a.1.y);
            let db = (b.0.x - b.1.x).hypot(b.0.y - b.1.y);
            da.total_cmp(&db)
        });
        if let Some((t, c)) = worst {
            let dir = if t.x < c.x { "left" } else { "right" };
            let before = canvas_now.clone();
            canvas_now.upsert(ClipArtPiece { x: t.x, y: t.y, ..*c });
            rounds.push(ReleaseRound {
                abs_b: Some(fmt(&before)),
                abs_d: fmt(&canvas_now),
                msg_t: format!("move the {} a bit to the {dir}", name_words(t.kind)),
                msg_d: "ok".into(),
                peeked: true,
            });
        }
    }

    let fixed = fmt(&canvas_now);
    rounds.push(ReleaseRound {
        abs_b: Some(fixed.clone()),
        abs_d: fixed,
        msg_t: CLOSINGS.choose(rng).expect("nonempty").to_string(),
        msg_d: "ok".into(),
        peeked: false,
    });

    ReleaseDialog {
        abs_t: fmt(&target),
        image_id: Some(rng.random_range(0..10_000)),
        dialog: rounds,
        duration: Some(rng.random_range(90.0..900.0f64).round()),
    }
}

/// Generates `train`, `val` and `test` dialogs keyed `<split>_<nnnnn>`.
pub fn generate_release(cfg: &SynthConfig) -> ReleaseFile {
    let canvas = library().canvas;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = BTreeMap::new();
    let mut keys = Vec::new();
    for (split, n) in [("train", cfg.train), ("val", cfg.val), ("test", cfg.test)] {
        keys.extend((0..n).map(|i| format!("{split}_{i:05}")));
    }
    // Dialog content does not depend on the split it lands in.
    keys.shuffle(&mut rng);
    for key in keys {
        data.insert(key, generate_dialog(&mut rng, canvas, cfg.anomaly_rate, cfg.drawer_noise.clamp(0.0, 1.0)));
    }
    ReleaseFile { data }
}

pub fn write_release(dir: &Path, cfg: &SynthConfig) -> Result<std::path::PathBuf, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let path = dir.join("codraw_synthetic.json");
    let json = serde_json::to_string(&generate_release(cfg)).expect("release serializes");
    std::fs::write(&path, json).map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}
