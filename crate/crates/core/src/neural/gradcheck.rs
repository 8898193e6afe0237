//! Central finite-difference check of the analytic gradient.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{drawer_loss, forward, loss_and_grad, DrawerParams, Hyper, Prepared, BLOCK_NAMES};

/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub block: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

fn loss_of(p: &DrawerParams, ex: &[Prepared], h: &Hyper) -> f64 {
    ex.iter().map(|e| drawer_loss(&forward(p, &e.ids, &e.canvas).expect("valid example").logits, &e.added, h)).sum()
}

/// Compares every entry of each block, or a seeded sample of at most
/// `max_per_block` entries, against `(L(θ+ε) − L(θ−ε)) / 2ε`.
pub fn gradient_check(
    params: &DrawerParams,
    examples: &[Prepared],
    h: &Hyper,
    eps: f64,
    max_per_block: Option<usize>,
    seed: u64,
) -> Vec<BlockCheck> {
    let mut analytic = params.zeros_like();
    for ex in examples {
        loss_and_grad(params, ex, h, &mut analytic).expect("valid example");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut out = Vec::new();
    for b in 0..BLOCK_NAMES.len() {
        let n = params.blocks()[b].len();
        let idx: Vec<usize> = match max_per_block {
            Some(m) if m < n => sample(&mut rng, n, m).into_vec(),
            _ => (0..n).collect(),
        };
        let mut worst: f64 = 0.0;
        for &i in &idx {
            let orig = params.blocks()[b].data[i];
            probe.blocks_mut()[b].data[i] = orig + eps;
            let up = loss_of(&probe, examples, h);
            probe.blocks_mut()[b].data[i] = orig - eps;
            let down = loss_of(&probe, examples, h);
            probe.blocks_mut()[b].data[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let r = relative_error(analytic.blocks()[b].data[i], numeric);
            worst = worst.max(r);
        }
        out.push(BlockCheck { block: BLOCK_NAMES[b], checked: idx.len(), max_rel_error: worst });
    }
    out
}
