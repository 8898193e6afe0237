//! Single-layer LSTM with gate order input, forget, cell, output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Mat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `4H x E`
    pub wx: Mat,
    /// `4H x H`
    pub wh: Mat,
    /// `4H x 1`
    pub b: Mat,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams { wx: Mat::zeros(4 * hidden, input), wh: Mat::zeros(4 * hidden, hidden), b: Mat::zeros(4 * hidden, 1) }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, forget_bias: f64, rng: &mut R) -> Self {
        let scale = 1.0 / ((input + hidden) as f64).sqrt();
        let mut b = Mat::zeros(4 * hidden, 1);
        b.data[hidden..2 * hidden].fill(forget_bias);
        LstmParams { wx: Mat::uniform(4 * hidden, input, scale, rng), wh: Mat::uniform(4 * hidden, hidden, scale, rng), b }
    }

    pub fn hidden(&self) -> usize {
        self.wh.cols
    }

    pub fn input(&self) -> usize {
        self.wx.cols
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.input(), self.hidden())
    }
}

/// Activations kept for backpropagation, one entry per step.
#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    /// Gate activations `[i, f, g, o]` per step.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hiddens: Vec<Vec<f64>>,
}

impl LstmCache {
    pub fn final_hidden(&self) -> &[f64] {
        self.hiddens.last().expect("at least one step")
    }
}

/// Runs the cell over `inputs` from zero state.
pub fn forward(p: &LstmParams, inputs: &[&[f64]]) -> LstmCache {
    let h = p.hidden();
    let mut cache = LstmCache::default();
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for x in inputs {
        let mut z = p.b.data.clone();
        p.wx.matvec_add(x, &mut z);
        p.wh.matvec_add(&h_prev, &mut z);
        for k in 0..h {
            z[k] = sigmoid(z[k]);
            z[h + k] = sigmoid(z[h + k]);
            z[2 * h + k] = z[2 * h + k].tanh();
            z[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let c: Vec<f64> = (0..h).map(|k| z[h + k] * c_prev[k] + z[k] * z[2 * h + k]).collect();
        let hs: Vec<f64> = (0..h).map(|k| z[3 * h + k] * c[k].tanh()).collect();
        cache.gates.push(z);
        cache.cells.push(c.clone());
        cache.hiddens.push(hs.clone());
        h_prev = hs;
        c_prev = c;
    }
    cache
}

/// Backpropagates a gradient on the final hidden state. Accumulates parameter
/// gradients into `grad` and returns the gradient for each input.
pub fn backward(p: &LstmParams, inputs: &[&[f64]], cache: &LstmCache, d_final: &[f64], grad: &mut LstmParams) -> Vec<Vec<f64>> {
    let h = p.hidden();
    let steps = inputs.len();
    let mut dx = vec![vec![0.0; p.input()]; steps];
    let mut dh = d_final.to_vec();
    let mut dc = vec![0.0; h];
    let zeros = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps).rev() {
        let g = &cache.gates[t];
        let c = &cache.cells[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.hiddens[t - 1] } else { &zeros };
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = c[k].tanh();
            let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dck * gg * i * (1.0 - i);
            dz[h + k] = dck * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dck * i * (1.0 - gg * gg);
            dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
            dc[k] = dck * f;
        }
        grad.wx.add_outer(&dz, inputs[t]);
        grad.wh.add_outer(&dz, h_prev);
        for (b, d) in grad.b.data.iter_mut().zip(&dz) {
            *b += d;
        }
        p.wx.matvec_t_add(&dz, &mut dx[t]);
        dh.fill(0.0);
        p.wh.matvec_t_add(&dz, &mut dh);
    }
    dx
}
