//! Minibatch momentum SGD over drawer training rounds.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{loss_and_grad, DrawerParams, Hyper, Prepared, TrainingExample};
use super::vocab::Vocab;
use super::NeuralDrawer;
use crate::agents::{AgentManifest, TrainedOn};
use crate::dataset::{transcripts_fingerprint, Corpus, CorpusSplit, DialogTranscript, Partition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("crosstalk violation: the drawer may only be trained on drawer_train, not {0}")]
    Crosstalk(Partition),
    #[error("no training examples")]
    NoExamples,
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
    pub dev_similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub examples: usize,
    pub vocab: usize,
    pub params: usize,
    pub epochs: Vec<EpochLog>,
}

/// One example per round with a non-empty teller message. The canvas is the
/// recorded snapshot before the round; only pieces of types that were not
/// also removed in that round count as targets.
pub fn examples_from_transcripts<'a, I>(transcripts: I) -> Vec<TrainingExample>
where
    I: IntoIterator<Item = &'a DialogTranscript>,
{
    let mut out = Vec::new();
    for t in transcripts {
        let mut before = crate::scene::Scene::new();
        for r in &t.rounds {
            if !r.teller.is_empty() {
                let removed: BTreeSet<_> = r.removed.iter().collect();
                let added = r.added.iter().filter(|p| !removed.contains(&p.kind) && !before.contains(p.kind)).copied().collect();
                out.push(TrainingExample { tokens: r.teller.tokens.clone(), canvas: before.clone(), added });
            }
            before = r.canvas_after.clone();
        }
    }
    out
}

/// Summed loss and gradient over `batch`. Chunks of `chunk_size` examples are
/// processed in parallel and their sums added in chunk order, so the result
/// does not depend on the thread count.
pub fn batch_gradient(p: &DrawerParams, batch: &[&Prepared], h: &Hyper) -> (f64, DrawerParams) {
    let parts: Vec<(f64, DrawerParams)> = batch
        .par_chunks(h.chunk_size.max(1))
        .map(|chunk| {
            let mut g = p.zeros_like();
            let mut loss = 0.0;
            for ex in chunk {
                loss += loss_and_grad(p, ex, h, &mut g).expect("prepared against this vocabulary");
            }
            (loss, g)
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut loss, mut grad) = iter.next().unwrap_or_else(|| (0.0, p.zeros_like()));
    for (l, g) in iter {
        loss += l;
        grad.add_assign(&g);
    }
    (loss, grad)
}

/// Trains from `DrawerParams::init`. `on_epoch` receives the parameters after
/// each epoch and may return a dev similarity to log.
pub fn train_prepared(
    prepared: &[Prepared],
    vocab_len: usize,
    h: &Hyper,
    mut on_epoch: impl FnMut(usize, &DrawerParams) -> Option<f64>,
) -> Result<(DrawerParams, Vec<EpochLog>), TrainError> {
    if prepared.is_empty() {
        return Err(TrainError::NoExamples);
    }
    let mut params = DrawerParams::init(vocab_len, h);
    let mut velocity = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut lr = h.learning_rate;
    let mut log = Vec::new();
    for epoch in 0..h.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(h.batch_size.max(1)) {
            let refs: Vec<&Prepared> = batch.iter().map(|&i| &prepared[i]).collect();
            let (loss, mut grad) = batch_gradient(&params, &refs, h);
            total += loss;
            grad.scale(1.0 / batch.len() as f64);
            let norm = grad.norm();
            if !norm.is_finite() {
                return Err(TrainError::Diverged(epoch));
            }
            if h.clip_norm > 0.0 && norm > h.clip_norm {
                grad.scale(h.clip_norm / norm);
            }
            velocity.scale(h.momentum);
            velocity.add_assign(&grad);
            for (w, v) in params.blocks_mut().into_iter().zip(velocity.blocks()) {
                for (wi, vi) in w.data.iter_mut().zip(&v.data) {
                    *wi -= lr * vi;
                }
            }
        }
        let dev_similarity = on_epoch(epoch, &params);
        let mean_loss = total / prepared.len() as f64;
        tracing::info!(epoch, mean_loss, lr, ?dev_similarity, "epoch done");
        log.push(EpochLog { epoch, mean_loss, learning_rate: lr, dev_similarity });
        lr *= h.lr_decay;
    }
    Ok((params, log))
}

/// Builds the vocabulary from `train`, fits a drawer and stamps its manifest.
pub fn train_on_transcripts(
    train: &[&DialogTranscript],
    trained_on: TrainedOn,
    h: &Hyper,
    dev: Option<&[&DialogTranscript]>,
) -> Result<(NeuralDrawer, TrainLog), TrainError> {
    let examples = examples_from_transcripts(train.iter().copied());
    let vocab = Vocab::build(examples.iter().map(|e| e.tokens.as_slice()), h.min_freq);
    let prepared: Vec<Prepared> = examples.iter().map(|e| Prepared::new(e, &vocab)).collect();
    let manifest =
        AgentManifest { agent_kind: "neural-drawer".into(), trained_on, data_fingerprint: transcripts_fingerprint(train.iter().copied()) };
    let (params, epochs) = train_prepared(&prepared, vocab.len(), h, |_, p| {
        let dev = dev?;
        let drawer = NeuralDrawer::new(manifest.clone(), h.clone(), vocab.clone(), p.clone());
        Some(crate::eval::eval_script_drawer(&drawer, dev.iter().copied(), 1).mean)
    })?;
    let log = TrainLog { examples: prepared.len(), vocab: vocab.len(), params: params.num_params(), epochs };
    Ok((NeuralDrawer::new(manifest, h.clone(), vocab, params), log))
}

/// Trains on a split partition; anything other than `drawer_train` is refused.
pub fn train_drawer(
    corpus: &Corpus,
    split: &CorpusSplit,
    partition: Partition,
    h: &Hyper,
    dev: Option<&[&DialogTranscript]>,
) -> Result<(NeuralDrawer, TrainLog), TrainError> {
    if partition != Partition::DrawerTrain {
        return Err(TrainError::Crosstalk(partition));
    }
    let train: Vec<&DialogTranscript> = corpus.subset(split.get(partition)).collect();
    train_on_transcripts(&train, TrainedOn::DrawerTrain, h, dev)
}
