//! Rule-based nearest-neighbor teller and drawer.
//!
//! Both retrieve from the single-clip-art rounds of one training partition:
//! the teller copies the message whose drawn piece best matches the piece it
//! wants to describe, the drawer copies the piece drawn after the message
//! closest to what it was told. Ties go to the earliest round.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::edit_distance::bounded_edit_distance;
use super::{AgentManifest, DrawerAgent, DrawerTurn, TellerAgent, TrainedOn};
use crate::dataset::{extract_single_clipart_rounds, DialogTranscript, Message, SingleRound};
use crate::fingerprint;
use crate::metric::{scene_similarity, SimilarityWeights};
use crate::scene::{ClipArtPiece, DrawerAction, Scene, NUM_TYPES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("retrieval set has no single-clip-art rounds")]
pub struct EmptyIndex;

/// Exact retrieval index over single-clip-art rounds.
#[derive(Debug)]
pub struct NearestNeighborIndex {
    rounds: Vec<SingleRound>,
    scenes: Vec<Scene>,
    chars: Vec<Vec<char>>,
    by_type: Vec<Vec<usize>>,
    by_len: BTreeMap<usize, Vec<usize>>,
    trained_on: TrainedOn,
    fingerprint: String,
}

impl NearestNeighborIndex {
    pub fn build<'a, I>(transcripts: I, trained_on: TrainedOn) -> Self
    where
        I: IntoIterator<Item = &'a DialogTranscript>,
    {
        Self::from_rounds(extract_single_clipart_rounds(transcripts), trained_on)
    }

    pub fn from_rounds(rounds: Vec<SingleRound>, trained_on: TrainedOn) -> Self {
        let mut by_type = vec![Vec::new(); NUM_TYPES];
        let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut scenes = Vec::with_capacity(rounds.len());
        let mut chars = Vec::with_capacity(rounds.len());
        for (i, r) in rounds.iter().enumerate() {
            by_type[r.piece.kind.index()].push(i);
            scenes.push(Scene::from_pieces([r.piece]).expect("single piece"));
            let c: Vec<char> = r.message.chars().collect();
            by_len.entry(c.len()).or_default().push(i);
            chars.push(c);
        }
        let fingerprint = fingerprint::sha256_hex(serde_json::to_vec(&rounds).expect("rounds serialize"));
        NearestNeighborIndex { rounds, scenes, chars, by_type, by_len, trained_on, fingerprint }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[SingleRound] {
        &self.rounds
    }

    pub fn trained_on(&self) -> TrainedOn {
        self.trained_on
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn score(&self, query: &Scene, i: usize) -> f64 {
        scene_similarity(query, &self.scenes[i], &SimilarityWeights::DEFAULT).score
    }

    /// Index of the round maximising `s({piece}, C+_r)`.
    pub fn best_round_for_piece(&self, piece: &ClipArtPiece) -> Result<usize, EmptyIndex> {
        if self.rounds.is_empty() {
            return Err(EmptyIndex);
        }
        let query = Scene::from_pieces([*piece]).expect("single piece");
        // Rounds of other types score exactly 0, so a positive best within the
        // type bucket is the global best.
        let mut best: Option<(f64, usize)> = None;
        for &i in &self.by_type[piece.kind.index()] {
            let s = self.score(&query, i);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, i));
            }
        }
        if let Some((s, i)) = best {
            if s > 0.0 {
                return Ok(i);
            }
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..self.rounds.len() {
            let s = self.score(&query, i);
            if s > best.0 {
                best = (s, i);
            }
        }
        Ok(best.1)
    }

    /// Index of the round whose message is closest in edit distance.
    pub fn nearest_message(&self, message: &str) -> Result<usize, EmptyIndex> {
        if self.rounds.is_empty() {
            return Err(EmptyIndex);
        }
        let q: Vec<char> = message.chars().collect();
        // (distance, round index), compared lexicographically.
        let mut best = (usize::MAX, usize::MAX);
        let max_len = *self.by_len.keys().next_back().expect("nonempty");
        for gap in 0..=max_len.max(q.len()) {
            if gap > best.0 {
                break;
            }
            let lens = [q.len().checked_sub(gap), Some(q.len() + gap).filter(|_| gap > 0)];
            for len in lens.into_iter().flatten() {
                let Some(bucket) = self.by_len.get(&len) else { continue };
                for &i in bucket {
                    let limit = if i < best.1 { best.0 } else { best.0.saturating_sub(1) };
                    if i > best.1 && best.0 == 0 {
                        continue;
                    }
                    if let Some(d) = bounded_edit_distance(&q, &self.chars[i], limit.min(q.len().max(len))) {
                        if (d, i) < best {
                            best = (d, i);
                        }
                    }
                }
            }
        }
        Ok(best.1)
    }
}

/// Describe order: sky, then large scenery, then people and animals, then
/// small items; type id within a stratum.
pub fn rb_teller_order(target: &Scene) -> Vec<ClipArtPiece> {
    let mut pieces: Vec<ClipArtPiece> = target.pieces().copied().collect();
    pieces.sort_by_key(|p| (p.kind.info().teller_stratum, p.kind));
    pieces
}

pub struct RuleBasedTeller {
    manifest: AgentManifest,
    index: Arc<NearestNeighborIndex>,
}

impl RuleBasedTeller {
    pub fn new(index: Arc<NearestNeighborIndex>) -> Self {
        let manifest = AgentManifest {
            agent_kind: "rb-teller".into(),
            trained_on: index.trained_on(),
            data_fingerprint: index.fingerprint().to_owned(),
        };
        RuleBasedTeller { manifest, index }
    }

    /// The retrieved message for one piece.
    pub fn message_for(&self, piece: &ClipArtPiece) -> Result<&SingleRound, EmptyIndex> {
        Ok(&self.index.rounds()[self.index.best_round_for_piece(piece)?])
    }
}

impl TellerAgent for RuleBasedTeller {
    fn manifest(&self) -> &AgentManifest {
        &self.manifest
    }

    fn next_message(&self, target: &Scene, history: &[String]) -> Option<String> {
        let piece = *rb_teller_order(target).get(history.len())?;
        self.message_for(&piece).ok().map(|r| r.message.clone())
    }
}

pub struct RuleBasedDrawer {
    manifest: AgentManifest,
    index: Arc<NearestNeighborIndex>,
}

impl RuleBasedDrawer {
    pub fn new(index: Arc<NearestNeighborIndex>) -> Self {
        let manifest = AgentManifest {
            agent_kind: "rb-drawer".into(),
            trained_on: index.trained_on(),
            data_fingerprint: index.fingerprint().to_owned(),
        };
        RuleBasedDrawer { manifest, index }
    }

    /// The piece drawn after the nearest recorded message. A type already on
    /// the canvas becomes an edit so the canvas keeps one piece per type.
    pub fn rb_drawer_act(&self, message: &str, canvas: &Scene) -> Result<DrawerAction, EmptyIndex> {
        let piece = self.index.rounds()[self.index.nearest_message(message)?].piece;
        Ok(if canvas.contains(piece.kind) {
            DrawerAction { edits: vec![piece], ..DrawerAction::default() }
        } else {
            DrawerAction::add(piece)
        })
    }
}

impl DrawerAgent for RuleBasedDrawer {
    fn manifest(&self) -> &AgentManifest {
        &self.manifest
    }

    fn act(&self, message: &Message, canvas: &Scene) -> DrawerTurn {
        DrawerTurn::ack(self.rb_drawer_act(&message.joined(), canvas).unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::super::edit_distance::edit_distance;
    use super::*;
    use crate::scene::testing::{arb_piece, id, obj};
    use crate::scene::{ClipArtTypeId, Flip, Size};
    use proptest::prelude::*;

    fn round(i: usize, message: &str, piece: ClipArtPiece) -> SingleRound {
        SingleRound { scene_id: format!("s{i}"), round: 0, message: message.into(), piece }
    }

    fn index(rounds: Vec<SingleRound>) -> Arc<NearestNeighborIndex> {
        Arc::new(NearestNeighborIndex::from_rounds(rounds, TrainedOn::TellerTrain))
    }

    fn brute_teller(idx: &NearestNeighborIndex, piece: &ClipArtPiece) -> usize {
        let q = Scene::from_pieces([*piece]).unwrap();
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, r) in idx.rounds().iter().enumerate() {
            let s = scene_similarity(&q, &Scene::from_pieces([r.piece]).unwrap(), &SimilarityWeights::DEFAULT).score;
            if s > best.0 {
                best = (s, i);
            }
        }
        best.1
    }

    fn brute_drawer(idx: &NearestNeighborIndex, message: &str) -> usize {
        let mut best = (usize::MAX, 0);
        for (i, r) in idx.rounds().iter().enumerate() {
            let d = edit_distance(message, &r.message);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    #[test]
    fn teller_order_sky_then_people_then_small() {
        let mike = ClipArtPiece::human(id("mike"), Flip::FaceLeft, Size::Normal, 0, 0, 0.5, 0.7);
        let target = Scene::from_pieces([mike, obj("sun", 0.1, 0.1), obj("baseball_cap", 0.5, 0.6)]).unwrap();
        let order: Vec<_> = rb_teller_order(&target).iter().map(|p| p.kind.name()).collect();
        assert_eq!(order, ["sun", "mike", "baseball_cap"]);
        let single = Scene::from_pieces([obj("dog", 0.3, 0.3)]).unwrap();
        assert_eq!(rb_teller_order(&single), vec![obj("dog", 0.3, 0.3)]);
    }

    #[test]
    fn exact_piece_retrieves_its_message() {
        let idx = index(vec![
            round(0, "a sun", obj("sun", 0.5, 0.5)),
            round(1, "sun top left", obj("sun", 0.1, 0.1)),
            round(2, "a tree", obj("oak_tree", 0.1, 0.1)),
        ]);
        let teller = RuleBasedTeller::new(idx);
        assert_eq!(teller.message_for(&obj("sun", 0.1, 0.1)).unwrap().message, "sun top left");
        // Absent type: every round scores 0, earliest wins.
        assert_eq!(teller.message_for(&obj("dog", 0.1, 0.1)).unwrap().message, "a sun");
    }

    #[test]
    fn teller_describes_each_piece_then_stops() {
        let idx = index(vec![round(0, "a sun", obj("sun", 0.5, 0.5)), round(1, "a tree", obj("oak_tree", 0.1, 0.1))]);
        let teller = RuleBasedTeller::new(idx);
        let target = Scene::from_pieces([obj("oak_tree", 0.2, 0.5), obj("sun", 0.4, 0.1), obj("dog", 0.5, 0.8)]).unwrap();
        let mut history = Vec::new();
        while let Some(m) = teller.next_message(&target, &history) {
            history.push(m);
        }
        assert_eq!(history, ["a sun", "a tree", "a sun"]);
    }

    #[test]
    fn drawer_copies_nearest_message_piece() {
        let idx = index(vec![
            round(0, "big sun on the left", obj("sun", 0.1, 0.1)),
            round(1, "a dog bottom right", obj("dog", 0.8, 0.8)),
            round(2, "a dog bottom right", obj("dog", 0.2, 0.8)),
        ]);
        let drawer = RuleBasedDrawer::new(idx);
        let a = drawer.rb_drawer_act("a dog bottom right", &Scene::new()).unwrap();
        assert_eq!(a, DrawerAction::add(obj("dog", 0.8, 0.8)), "tie goes to the earliest round");
        let b = drawer.rb_drawer_act("big sun on left", &Scene::new()).unwrap();
        assert_eq!(b.adds[0].kind, id("sun"));
        let turn = drawer.act(&Message::from_text("big sun"), &Scene::new());
        assert_eq!(turn.reply, "ok");
    }

    #[test]
    fn drawer_turns_duplicate_type_into_edit() {
        let idx = index(vec![round(0, "sun", obj("sun", 0.1, 0.1))]);
        let drawer = RuleBasedDrawer::new(idx);
        let canvas = Scene::from_pieces([obj("sun", 0.9, 0.9)]).unwrap();
        let action = drawer.rb_drawer_act("sun", &canvas).unwrap();
        assert_eq!(action.edits, vec![obj("sun", 0.1, 0.1)]);
        assert!(canvas.apply(&action).is_ok());
    }

    #[test]
    fn empty_index_errors() {
        let idx = index(vec![]);
        assert_eq!(idx.best_round_for_piece(&obj("sun", 0.1, 0.1)), Err(EmptyIndex));
        assert_eq!(idx.nearest_message("x"), Err(EmptyIndex));
    }

    fn arb_rounds() -> impl Strategy<Value = Vec<SingleRound>> {
        let types = [0u8, 2, 9, 18, 20, 43];
        proptest::collection::vec(
            (proptest::sample::select(types.to_vec()), "[abcd ]{0,14}")
                .prop_flat_map(|(t, m)| (arb_piece(ClipArtTypeId::new(t).unwrap()), Just(m))),
            1..40,
        )
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (p, m))| round(i, &m, p)).collect())
    }

    proptest! {
        #[test]
        fn teller_argmax_matches_brute_force(rounds in arb_rounds(), probe in arb_piece(ClipArtTypeId::new(18).unwrap())) {
            let idx = NearestNeighborIndex::from_rounds(rounds, TrainedOn::TellerTrain);
            prop_assert_eq!(idx.best_round_for_piece(&probe).unwrap(), brute_teller(&idx, &probe));
            let other = ClipArtPiece { kind: ClipArtTypeId::new(30).unwrap(), pose: None, expression: None, ..probe };
            prop_assert_eq!(idx.best_round_for_piece(&other).unwrap(), brute_teller(&idx, &other));
        }

        #[test]
        fn drawer_argmin_matches_brute_force(rounds in arb_rounds(), probe in "[abcd ]{0,14}") {
            let idx = NearestNeighborIndex::from_rounds(rounds, TrainedOn::DrawerTrain);
            prop_assert_eq!(idx.nearest_message(&probe).unwrap(), brute_drawer(&idx, &probe));
        }
    }
}
