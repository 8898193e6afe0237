//! Message encoder, action head, loss and greedy decoding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lstm::{self, LstmCache, LstmParams};
use super::tensor::{argmax, log_sum_exp, sigmoid, softmax, softplus, Mat};
use super::vocab::Vocab;
use crate::scene::features::{canvas_feature_vector, CANVAS_VECTOR_LEN};
use crate::scene::{ClipArtPiece, ClipArtTypeId, DrawerAction, Flip, Scene, Size, NUM_EXPRESSIONS, NUM_POSES, NUM_TYPES};

/// Offsets inside one type's block of the action output.
pub mod layout {
    pub const PRESENCE: usize = 0;
    pub const FLIP: usize = 1;
    pub const SIZE: usize = 3;
    pub const POSE: usize = 6;
    pub const EXPRESSION: usize = 13;
    pub const X: usize = 18;
    pub const Y: usize = 19;
    pub const WIDTH: usize = 20;
    pub const LEN: usize = super::NUM_TYPES * WIDTH;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub embed: usize,
    pub hidden: usize,
    pub ffn: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning rate multiplier applied after each epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub w_presence: f64,
    pub w_attributes: f64,
    pub lambda_pos: f64,
    pub min_freq: usize,
    pub forget_bias: f64,
    /// Examples per gradient chunk; chunk sums are added in order.
    pub chunk_size: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            embed: 64,
            hidden: 128,
            ffn: 256,
            learning_rate: 0.05,
            momentum: 0.9,
            lr_decay: 0.95,
            batch_size: 32,
            epochs: 15,
            clip_norm: 5.0,
            w_presence: 1.0,
            w_attributes: 1.0,
            lambda_pos: 1.0,
            min_freq: 2,
            forget_bias: 1.0,
            chunk_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("canvas vector has length {0}, expected {CANVAS_VECTOR_LEN}")]
    Canvas(usize),
    #[error("token id {0} outside a vocabulary of {1}")]
    Token(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawerParams {
    /// `V x E`
    pub embedding: Mat,
    pub forward: LstmParams,
    pub backward: LstmParams,
    /// `F x 2552`
    pub w_canvas: Mat,
    /// `F x 2H`
    pub w_msg: Mat,
    pub b_in: Mat,
    /// `1160 x F`
    pub w_out: Mat,
    pub b_out: Mat,
}

pub const BLOCK_NAMES: [&str; 12] = [
    "embedding",
    "forward.wx",
    "forward.wh",
    "forward.b",
    "backward.wx",
    "backward.wh",
    "backward.b",
    "w_canvas",
    "w_msg",
    "b_in",
    "w_out",
    "b_out",
];

impl DrawerParams {
    pub fn zeros(vocab: usize, h: &Hyper) -> Self {
        DrawerParams {
            embedding: Mat::zeros(vocab, h.embed),
            forward: LstmParams::zeros(h.embed, h.hidden),
            backward: LstmParams::zeros(h.embed, h.hidden),
            w_canvas: Mat::zeros(h.ffn, CANVAS_VECTOR_LEN),
            w_msg: Mat::zeros(h.ffn, 2 * h.hidden),
            b_in: Mat::zeros(h.ffn, 1),
            w_out: Mat::zeros(layout::LEN, h.ffn),
            b_out: Mat::zeros(layout::LEN, 1),
        }
    }

    /// Uniform fan-in initialisation from `h.seed`.
    pub fn init(vocab: usize, h: &Hyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
        let fan_in = |n: usize| 1.0 / (n as f64).sqrt();
        let embedding = Mat::uniform(vocab, h.embed, 0.1, &mut rng);
        let forward = LstmParams::init(h.embed, h.hidden, h.forget_bias, &mut rng);
        let backward = LstmParams::init(h.embed, h.hidden, h.forget_bias, &mut rng);
        // The canvas input is sparse: scale by the typical number of active entries.
        let w_canvas = Mat::uniform(h.ffn, CANVAS_VECTOR_LEN, fan_in(64), &mut rng);
        let w_msg = Mat::uniform(h.ffn, 2 * h.hidden, fan_in(2 * h.hidden), &mut rng);
        let w_out = Mat::uniform(layout::LEN, h.ffn, fan_in(h.ffn), &mut rng);
        DrawerParams { embedding, forward, backward, w_canvas, w_msg, b_in: Mat::zeros(h.ffn, 1), w_out, b_out: Mat::zeros(layout::LEN, 1) }
    }

    pub fn zeros_like(&self) -> Self {
        DrawerParams {
            embedding: self.embedding.zeros_like(),
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
            w_canvas: self.w_canvas.zeros_like(),
            w_msg: self.w_msg.zeros_like(),
            b_in: self.b_in.zeros_like(),
            w_out: self.w_out.zeros_like(),
            b_out: self.b_out.zeros_like(),
        }
    }

    pub fn blocks(&self) -> [&Mat; 12] {
        [
            &self.embedding,
            &self.forward.wx,
            &self.forward.wh,
            &self.forward.b,
            &self.backward.wx,
            &self.backward.wh,
            &self.backward.b,
            &self.w_canvas,
            &self.w_msg,
            &self.b_in,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Mat; 12] {
        [
            &mut self.embedding,
            &mut self.forward.wx,
            &mut self.forward.wh,
            &mut self.forward.b,
            &mut self.backward.wx,
            &mut self.backward.wh,
            &mut self.backward.b,
            &mut self.w_canvas,
            &mut self.w_msg,
            &mut self.b_in,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn vocab_len(&self) -> usize {
        self.embedding.rows
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }

    pub fn add_assign(&mut self, other: &DrawerParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in self.blocks_mut() {
            b.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks().iter().map(|b| b.sum_sq()).sum::<f64>().sqrt()
    }
}

/// Raw action-head output for every type.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionLogits(pub Vec<f64>);

impl ActionLogits {
    fn block(&self, kind: usize) -> &[f64] {
        &self.0[kind * layout::WIDTH..(kind + 1) * layout::WIDTH]
    }

    pub fn presence_logit(&self, kind: usize) -> f64 {
        self.block(kind)[layout::PRESENCE]
    }

    pub fn presence_prob(&self, kind: usize) -> f64 {
        sigmoid(self.presence_logit(kind))
    }

    pub fn flip(&self, kind: usize) -> &[f64] {
        &self.block(kind)[layout::FLIP..layout::SIZE]
    }

    pub fn size(&self, kind: usize) -> &[f64] {
        &self.block(kind)[layout::SIZE..layout::POSE]
    }

    pub fn pose(&self, kind: usize) -> &[f64] {
        &self.block(kind)[layout::POSE..layout::EXPRESSION]
    }

    pub fn expression(&self, kind: usize) -> &[f64] {
        &self.block(kind)[layout::EXPRESSION..layout::X]
    }

    pub fn position(&self, kind: usize) -> (f64, f64) {
        let b = self.block(kind);
        (b[layout::X], b[layout::Y])
    }

    pub fn size_probs(&self, kind: usize) -> Vec<f64> {
        softmax(self.size(kind))
    }
}

/// Nonzero entries of the canvas feature vector.
pub fn sparse_canvas(canvas: &Scene) -> Vec<(usize, f64)> {
    canvas_feature_vector(canvas).into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect()
}

/// A training pair: teller message, canvas before the drawer acted, and the
/// pieces the human added.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub tokens: Vec<String>,
    pub canvas: Scene,
    pub added: Vec<ClipArtPiece>,
}

/// An example mapped through the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub ids: Vec<usize>,
    pub canvas: Vec<(usize, f64)>,
    pub added: Vec<ClipArtPiece>,
}

impl Prepared {
    pub fn new(ex: &TrainingExample, vocab: &Vocab) -> Self {
        Prepared { ids: vocab.encode(&ex.tokens), canvas: sparse_canvas(&ex.canvas), added: ex.added.clone() }
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    ids: Vec<usize>,
    fwd: LstmCache,
    bwd: LstmCache,
    v_msg: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    pub logits: ActionLogits,
}

impl ForwardCache {
    pub fn v_msg(&self) -> &[f64] {
        &self.v_msg
    }
}

fn embedded<'a>(p: &'a DrawerParams, ids: &[usize]) -> Vec<&'a [f64]> {
    ids.iter().map(|&i| p.embedding.row(i)).collect()
}

/// `[h_fwd_final; h_bwd_final]` for a sequence of token ids.
pub fn encode_message(p: &DrawerParams, ids: &[usize]) -> Result<Vec<f64>, ShapeError> {
    let ids = checked_ids(p, ids)?;
    let xs = embedded(p, &ids);
    let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
    let mut v = lstm::forward(&p.forward, &xs).final_hidden().to_vec();
    v.extend_from_slice(lstm::forward(&p.backward, &rev).final_hidden());
    Ok(v)
}

fn checked_ids(p: &DrawerParams, ids: &[usize]) -> Result<Vec<usize>, ShapeError> {
    if let Some(&bad) = ids.iter().find(|&&i| i >= p.vocab_len()) {
        return Err(ShapeError::Token(bad, p.vocab_len()));
    }
    Ok(if ids.is_empty() { vec![super::vocab::UNK] } else { ids.to_vec() })
}

/// `W_out relu(W_canvas v_canvas + W_msg v_msg + b_in) + b_out` with a dense canvas vector.
pub fn drawer_forward(canvas_vec: &[f64], v_msg: &[f64], p: &DrawerParams) -> Result<ActionLogits, ShapeError> {
    if canvas_vec.len() != CANVAS_VECTOR_LEN {
        return Err(ShapeError::Canvas(canvas_vec.len()));
    }
    let sparse: Vec<(usize, f64)> = canvas_vec.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
    Ok(head(p, &sparse, v_msg).2)
}

fn head(p: &DrawerParams, canvas: &[(usize, f64)], v_msg: &[f64]) -> (Vec<f64>, Vec<f64>, ActionLogits) {
    let f = p.b_in.rows;
    let mut pre = p.b_in.data.clone();
    for (r, o) in pre.iter_mut().enumerate() {
        let row = p.w_canvas.row(r);
        *o += canvas.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
    }
    p.w_msg.matvec_add(v_msg, &mut pre);
    let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
    let mut out = p.b_out.data.clone();
    p.w_out.matvec_add(&hidden, &mut out);
    debug_assert_eq!(hidden.len(), f);
    (pre, hidden, ActionLogits(out))
}

pub fn forward(p: &DrawerParams, ids: &[usize], canvas: &[(usize, f64)]) -> Result<ForwardCache, ShapeError> {
    let ids = checked_ids(p, ids)?;
    let xs = embedded(p, &ids);
    let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
    let fwd = lstm::forward(&p.forward, &xs);
    let bwd = lstm::forward(&p.backward, &rev);
    let mut v_msg = fwd.final_hidden().to_vec();
    v_msg.extend_from_slice(bwd.final_hidden());
    let (pre, hidden, logits) = head(p, canvas, &v_msg);
    Ok(ForwardCache { ids, fwd, bwd, v_msg, pre, hidden, logits })
}

fn piece_targets(piece: &ClipArtPiece) -> (usize, usize, Option<(usize, usize)>) {
    let human = match (piece.pose, piece.expression) {
        (Some(p), Some(e)) if piece.is_human() => Some((p as usize, e as usize)),
        _ => None,
    };
    (piece.flip.index(), piece.size.index(), human)
}

/// Cross-entropy of `target` under `logits`, and its gradient scaled by `w`.
fn ce(logits: &[f64], target: usize, w: f64, grad: Option<&mut [f64]>) -> f64 {
    if let Some(g) = grad {
        for (k, (gk, pk)) in g.iter_mut().zip(softmax(logits)).enumerate() {
            *gk += w * (pk - f64::from(u8::from(k == target)));
        }
    }
    w * (log_sum_exp(logits) - logits[target])
}

/// Loss on the action logits and, optionally, its gradient with respect to them.
pub fn drawer_loss_with_grad(logits: &ActionLogits, added: &[ClipArtPiece], h: &Hyper, mut grad: Option<&mut [f64]>) -> f64 {
    let mut positive = [None; NUM_TYPES];
    for p in added {
        positive[p.kind.index()] = Some(p);
    }
    let mut loss = 0.0;
    for (kind, target) in positive.iter().enumerate() {
        let base = kind * layout::WIDTH;
        let q = logits.presence_logit(kind);
        let y = f64::from(u8::from(target.is_some()));
        loss += h.w_presence * (softplus(q) - y * q);
        if let Some(g) = grad.as_deref_mut() {
            g[base + layout::PRESENCE] += h.w_presence * (sigmoid(q) - y);
        }
        let Some(piece) = target else { continue };
        let (flip, size, human) = piece_targets(piece);
        let group = |lo: usize, hi: usize, t: usize, grad: Option<&mut [f64]>| {
            ce(&logits.0[base + lo..base + hi], t, h.w_attributes, grad.map(|g| &mut g[base + lo..base + hi]))
        };
        loss += group(layout::FLIP, layout::SIZE, flip, grad.as_deref_mut());
        loss += group(layout::SIZE, layout::POSE, size, grad.as_deref_mut());
        if let Some((pose, expr)) = human {
            loss += group(layout::POSE, layout::EXPRESSION, pose, grad.as_deref_mut());
            loss += group(layout::EXPRESSION, layout::X, expr, grad.as_deref_mut());
        }
        let (x, y) = logits.position(kind);
        let (dx, dy) = (x - piece.x, y - piece.y);
        loss += h.lambda_pos * (dx * dx + dy * dy);
        if let Some(g) = grad.as_deref_mut() {
            g[base + layout::X] += 2.0 * h.lambda_pos * dx;
            g[base + layout::Y] += 2.0 * h.lambda_pos * dy;
        }
    }
    loss
}

pub fn drawer_loss(logits: &ActionLogits, added: &[ClipArtPiece], h: &Hyper) -> f64 {
    drawer_loss_with_grad(logits, added, h, None)
}

/// Loss of one example; adds its parameter gradient into `grad`.
pub fn loss_and_grad(p: &DrawerParams, ex: &Prepared, h: &Hyper, grad: &mut DrawerParams) -> Result<f64, ShapeError> {
    let cache = forward(p, &ex.ids, &ex.canvas)?;
    let mut d_out = vec![0.0; layout::LEN];
    let loss = drawer_loss_with_grad(&cache.logits, &ex.added, h, Some(&mut d_out));

    grad.w_out.add_outer(&d_out, &cache.hidden);
    grad.b_out.add_assign(&Mat { rows: layout::LEN, cols: 1, data: d_out.clone() });
    let mut d_hidden = vec![0.0; cache.hidden.len()];
    p.w_out.matvec_t_add(&d_out, &mut d_hidden);
    let d_pre: Vec<f64> = d_hidden.iter().zip(&cache.pre).map(|(&d, &z)| if z > 0.0 { d } else { 0.0 }).collect();

    for (r, &d) in d_pre.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = grad.w_canvas.row_mut(r);
        for &(j, v) in &ex.canvas {
            row[j] += d * v;
        }
        grad.b_in.data[r] += d;
    }
    grad.w_msg.add_outer(&d_pre, &cache.v_msg);
    let mut d_msg = vec![0.0; cache.v_msg.len()];
    p.w_msg.matvec_t_add(&d_pre, &mut d_msg);

    let hdim = p.hidden();
    let xs = embedded(p, &cache.ids);
    let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
    let dx_f = lstm::backward(&p.forward, &xs, &cache.fwd, &d_msg[..hdim], &mut grad.forward);
    let dx_b = lstm::backward(&p.backward, &rev, &cache.bwd, &d_msg[hdim..], &mut grad.backward);
    let n = cache.ids.len();
    for (t, &id) in cache.ids.iter().enumerate() {
        let row = grad.embedding.row_mut(id);
        for (k, r) in row.iter_mut().enumerate() {
            *r += dx_f[t][k] + dx_b[n - 1 - t][k];
        }
    }
    Ok(loss)
}

/// Adds every absent type whose presence probability exceeds 0.5, with
/// argmax attributes. Positions are clamped to the canvas and a non-finite
/// position falls back to the centre.
pub fn greedy_decode(logits: &ActionLogits, canvas: &Scene) -> DrawerAction {
    let mut action = DrawerAction::default();
    for kind in ClipArtTypeId::all() {
        let i = kind.index();
        if canvas.contains(kind) || !(logits.presence_prob(i) > 0.5) {
            continue;
        }
        let flip = Flip::ALL[argmax(logits.flip(i))];
        let size = Size::ALL[argmax(logits.size(i))];
        let (x, y) = logits.position(i);
        let coord = |v: f64| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.5 };
        let piece = if kind.is_human() {
            let pose = argmax(logits.pose(i)) as u8;
            let expr = argmax(logits.expression(i)) as u8;
            debug_assert!(pose < NUM_POSES && expr < NUM_EXPRESSIONS);
            ClipArtPiece::human(kind, flip, size, pose, expr, coord(x), coord(y))
        } else {
            ClipArtPiece::object(kind, flip, size, coord(x), coord(y))
        };
        action.adds.push(piece);
    }
    action
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::testing::{id, obj};

    fn tiny() -> Hyper {
        Hyper { embed: 3, hidden: 4, ffn: 5, seed: 7, ..Hyper::default() }
    }

    fn logits_with(f: impl Fn(usize, &mut [f64])) -> ActionLogits {
        let mut v = vec![0.0; layout::LEN];
        for k in 0..NUM_TYPES {
            f(k, &mut v[k * layout::WIDTH..(k + 1) * layout::WIDTH]);
        }
        ActionLogits(v)
    }

    #[test]
    fn encoder_shape_and_determinism() {
        let p = DrawerParams::init(10, &tiny());
        let a = encode_message(&p, &[1, 2, 3]).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a, encode_message(&p, &[1, 2, 3]).unwrap());
        assert_ne!(a, encode_message(&p, &[3, 2, 1]).unwrap());
        assert_eq!(encode_message(&p, &[]).unwrap(), encode_message(&p, &[0]).unwrap());
        assert_eq!(encode_message(&p, &[10]), Err(ShapeError::Token(10, 10)));
    }

    #[test]
    fn zero_params_give_bias_logits() {
        let mut p = DrawerParams::zeros(4, &tiny());
        p.b_out.data.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.01);
        let v = encode_message(&p, &[1, 2]).unwrap();
        let logits = drawer_forward(&vec![1.0; CANVAS_VECTOR_LEN], &v, &p).unwrap();
        assert_eq!(logits.0, p.b_out.data);
        assert_eq!(drawer_forward(&[0.0; 3], &v, &p), Err(ShapeError::Canvas(3)));
    }

    #[test]
    fn presence_is_sigmoid_and_size_softmax_normalises() {
        let l = logits_with(|k, b| {
            b[0] = k as f64 - 20.0;
            b[3..6].copy_from_slice(&[0.3, -1.0, 2.0]);
        });
        assert!((l.presence_prob(21) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((l.size_probs(5).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decode_threshold_is_strict() {
        let sun = id("sun").index();
        let l = logits_with(|k, b| b[0] = if k == sun { 0.0 } else { -3.0 });
        assert!(greedy_decode(&l, &Scene::new()).is_empty());
        let l = logits_with(|k, b| {
            b[0] = if k == sun { (0.9f64 / 0.1).ln() } else { -3.0 };
            b[3..6].copy_from_slice(&[0.0, 0.0, 1.0]);
            b[1..3].copy_from_slice(&[0.0, 1.0]);
            b[18] = 0.25;
            b[19] = 1.7;
        });
        let a = greedy_decode(&l, &Scene::new());
        assert_eq!(a.adds, vec![ClipArtPiece::object(id("sun"), Flip::FaceRight, Size::Large, 0.25, 1.0)]);
        let on_canvas = Scene::from_pieces([obj("sun", 0.1, 0.1)]).unwrap();
        assert!(greedy_decode(&l, &on_canvas).is_empty());
    }

    #[test]
    fn decode_survives_garbage_logits() {
        let l = ActionLogits((0..layout::LEN).map(|i| [f64::NAN, f64::INFINITY, -f64::INFINITY, 3.0][i % 4]).collect());
        let a = greedy_decode(&l, &Scene::new());
        assert!(Scene::new().apply(&a).is_ok());
    }

    #[test]
    fn loss_matches_scalar_formula() {
        let h = Hyper { w_presence: 1.0, w_attributes: 0.5, lambda_pos: 2.0, ..tiny() };
        let dog = id("dog").index();
        let l = logits_with(|k, b| {
            b[0] = if k == dog { 1.0 } else { -2.0 };
            b[1] = 0.5;
            b[4] = 1.0;
            b[18] = 0.3;
            b[19] = 0.4;
        });
        let target = ClipArtPiece::object(id("dog"), Flip::FaceLeft, Size::Normal, 0.5, 0.5);
        let bce_pos = (1.0 + (-1.0f64).exp()).ln();
        let bce_neg = 57.0 * (1.0 + (-2.0f64).exp()).ln();
        let flip_ce = (0.5f64.exp() + 1.0).ln() - 0.5;
        let size_ce = (2.0 + 1.0f64.exp()).ln() - 1.0;
        let pos = 2.0 * (0.2 * 0.2 + 0.1 * 0.1);
        let expected = bce_pos + bce_neg + 0.5 * (flip_ce + size_ce) + pos;
        assert!((drawer_loss(&l, &[target], &h) - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_logits_drive_loss_to_zero() {
        let h = Hyper::default();
        let target = ClipArtPiece::human(id("jenny"), Flip::FaceRight, Size::Small, 3, 2, 0.4, 0.6);
        let big = 60.0;
        let l = logits_with(|k, b| {
            if k == target.kind.index() {
                b[0] = big;
                b[2] = big;
                b[3] = big;
                b[6 + 3] = big;
                b[13 + 2] = big;
                b[18] = 0.4;
                b[19] = 0.6;
            } else {
                b[0] = -big;
            }
        });
        assert!(drawer_loss(&l, &[target], &h) < 1e-20);
        let mut off = l.clone();
        off.0[target.kind.index() * layout::WIDTH + 18] += 0.1;
        assert!((drawer_loss(&off, &[target], &h) - h.lambda_pos * 0.01).abs() < 1e-12);
    }

    #[test]
    fn absent_type_order_only_affects_presence_terms() {
        let h = Hyper::default();
        let target = obj("sun", 0.3, 0.2);
        let l = logits_with(|k, b| {
            for (j, v) in b.iter_mut().enumerate() {
                *v = ((k * 31 + j * 7) % 13) as f64 / 5.0 - 1.0;
            }
        });
        let mut swapped = l.clone();
        let (a, b) = (id("dog").index(), id("owl").index());
        for j in 0..layout::WIDTH {
            swapped.0.swap(a * layout::WIDTH + j, b * layout::WIDTH + j);
        }
        assert!((drawer_loss(&l, &[target], &h) - drawer_loss(&swapped, &[target], &h)).abs() < 1e-12);
    }
}
