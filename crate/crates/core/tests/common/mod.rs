#![allow(dead_code)]

use codraw::dataset::official::{import_release, ImportOptions};
use codraw::dataset::synth::{generate_release, SynthConfig};
use codraw::dataset::Corpus;
use codraw::library::NUM_TYPES;
use codraw::scene::{ClipArtPiece, ClipArtTypeId, Flip, Scene, Size};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Flat copy of a piece, so the evaluator below does not lean on crate helpers.
#[derive(Debug, Clone, Copy)]
pub struct Flat {
    pub id: usize,
    pub faces_left: bool,
    pub size: usize,
    pub pose: Option<u8>,
    pub expression: Option<u8>,
    pub x: f64,
    pub y: f64,
}

pub fn flatten(scene: &Scene) -> Vec<Flat> {
    scene
        .pieces()
        .map(|p| Flat {
            id: p.kind.get() as usize,
            faces_left: p.flip == Flip::FaceLeft,
            size: match p.size {
                Size::Small => 0,
                Size::Normal => 1,
                Size::Large => 2,
            },
            pose: p.pose,
            expression: p.expression,
            x: p.x,
            y: p.y,
        })
        .collect()
}

fn mike_or_jenny(id: usize) -> bool {
    let name = ClipArtTypeId::new(id as u8).unwrap().name();
    name == "mike" || name == "jenny"
}

/// Scene similarity written straight from the formulas, with the default
/// weights `[5, 1, 0.5, 0.5, 1, 1, 1, 1]`. Both scenes empty scores 5; the
/// pairwise term is 0 with fewer than two shared types.
pub fn naive_similarity(truth: &[Flat], pred: &[Flat]) -> f64 {
    let w = [5.0, 1.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0];
    let find = |scene: &[Flat], id: usize| scene.iter().find(|p| p.id == id).copied();

    let mut shared = Vec::new();
    let mut union = 0;
    for id in 0..NUM_TYPES {
        let a = find(truth, id);
        let b = find(pred, id);
        if a.is_some() || b.is_some() {
            union += 1;
        }
        if let (Some(a), Some(b)) = (a, b) {
            shared.push((a, b));
        }
    }
    if union == 0 {
        return 5.0;
    }

    let mut g_total = 0.0;
    for &(c, ch) in &shared {
        let mut g = w[0];
        if c.faces_left != ch.faces_left {
            g -= w[1];
        }
        if mike_or_jenny(c.id) && c.expression != ch.expression {
            g -= w[2];
        }
        if mike_or_jenny(c.id) && c.pose != ch.pose {
            g -= w[3];
        }
        if c.size != ch.size {
            g -= w[4];
        }
        let dx = ch.x - c.x;
        let dy = ch.y - c.y;
        g -= w[5] * (dx * dx + dy * dy).sqrt();
        g_total += g;
    }

    let mut h_total = 0.0;
    for i in 0..shared.len() {
        for j in 0..shared.len() {
            if shared[i].0.id >= shared[j].0.id {
                continue;
            }
            let (ci, ci_hat) = shared[i];
            let (cj, cj_hat) = shared[j];
            if (ci_hat.x - cj_hat.x) * (ci.x - cj.x) < 0.0 {
                h_total -= w[6];
            }
            if (ci_hat.y - cj_hat.y) * (ci.y - cj.y) < 0.0 {
                h_total -= w[7];
            }
        }
    }

    let n_union = union as f64;
    let n_int = shared.len() as f64;
    let pairwise = if shared.len() < 2 { 0.0 } else { h_total / (n_union * (n_int - 1.0)) };
    g_total / n_union + pairwise
}

const POOL: [&str; 10] = ["sun", "cloud", "mike", "jenny", "dog", "oak_tree", "soccer_ball", "cat", "owl", "duck"];

fn coordinate(rng: &mut ChaCha8Rng) -> f64 {
    // Grid values make coordinate ties common.
    if rng.random_bool(0.25) {
        [0.0, 0.25, 0.5, 0.75, 1.0][rng.random_range(0..5)]
    } else {
        rng.random_range(-0.1..1.1)
    }
}

pub fn random_piece(rng: &mut ChaCha8Rng, kind: ClipArtTypeId) -> ClipArtPiece {
    let flip = Flip::ALL[rng.random_range(0..2)];
    let size = Size::ALL[rng.random_range(0..3)];
    let (x, y) = (coordinate(rng), coordinate(rng));
    if kind.is_human() {
        ClipArtPiece::human(kind, flip, size, rng.random_range(0..7), rng.random_range(0..5), x, y)
    } else {
        ClipArtPiece::object(kind, flip, size, x, y)
    }
}

fn pool_kind(rng: &mut ChaCha8Rng) -> ClipArtTypeId {
    if rng.random_bool(0.8) {
        ClipArtTypeId::by_name(POOL[rng.random_range(0..POOL.len())]).unwrap()
    } else {
        ClipArtTypeId::new(rng.random_range(0..NUM_TYPES as u8)).unwrap()
    }
}

/// Two scenes of at most `max` pieces with heavily overlapping type sets.
/// Shared pieces are usually perturbed copies so every penalty shows up.
pub fn random_pair(rng: &mut ChaCha8Rng, max: usize) -> (Scene, Scene) {
    let mut truth = Scene::new();
    for _ in 0..rng.random_range(0..=max) {
        let kind = pool_kind(rng);
        truth.upsert(random_piece(rng, kind));
    }
    let mut pred = Scene::new();
    for p in truth.pieces() {
        if pred.len() < max && rng.random_bool(0.7) {
            let mut q = *p;
            if rng.random_bool(0.3) {
                q = random_piece(rng, p.kind);
            } else if rng.random_bool(0.5) {
                q.x += rng.random_range(-0.3..0.3);
                q.y += rng.random_range(-0.3..0.3);
            }
            pred.upsert(q);
        }
    }
    while pred.len() < max && rng.random_bool(0.4) {
        let kind = pool_kind(rng);
        if !pred.contains(kind) {
            pred.upsert(random_piece(rng, kind));
        }
    }
    (truth, pred)
}

/// Imports a synthetic release held in memory.
pub fn synthetic_corpus(cfg: &SynthConfig) -> Corpus {
    import_release(&generate_release(cfg), &ImportOptions::default()).expect("synthetic release imports").0
}
