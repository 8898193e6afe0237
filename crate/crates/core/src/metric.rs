//! Scene similarity: type-level IOU and the weighted unary + pairwise score.
//!
//! Every evaluation path in the crate goes through [`scene_similarity`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{ClipArtPiece, ClipArtTypeId, Scene};

/// Weights `w0..w7`: base credit, flip, expression, pose, size, distance,
/// horizontal order, vertical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimilarityWeights(pub [f64; 8]);

impl SimilarityWeights {
    pub const DEFAULT: SimilarityWeights = SimilarityWeights([5.0, 1.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0]);

    /// Score of a perfect reconstruction.
    pub fn max_score(&self) -> f64 {
        self.0[0]
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<Vec<f64>> for SimilarityWeights {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let arr: [f64; 8] = v.try_into().map_err(|v: Vec<f64>| format!("expected 8 weights, got {}", v.len()))?;
        if arr.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("weights must be finite and nonnegative".into());
        }
        Ok(Self(arr))
    }
}

impl From<SimilarityWeights> for Vec<f64> {
    fn from(w: SimilarityWeights) -> Self {
        w.0.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unary term compares different types ({0} vs {1})")]
pub struct TypeMismatch(pub ClipArtTypeId, pub ClipArtTypeId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub score: f64,
    pub n_int: usize,
    pub n_union: usize,
    pub unary_total: f64,
    pub pairwise_total: f64,
    pub per_type_g: BTreeMap<ClipArtTypeId, f64>,
}

/// Intersection over union of the two scenes' type sets; 1 when both are empty.
pub fn iou(truth: &Scene, pred: &Scene) -> f64 {
    let (n_int, n_union) = overlap(truth, pred);
    if n_union == 0 {
        1.0
    } else {
        n_int as f64 / n_union as f64
    }
}

fn overlap(truth: &Scene, pred: &Scene) -> (usize, usize) {
    let n_int = truth.ids().filter(|&t| pred.contains(t)).count();
    (n_int, truth.len() + pred.len() - n_int)
}

/// Attribute agreement of two pieces of the same type.
pub fn unary_g(c: &ClipArtPiece, c_hat: &ClipArtPiece, w: &SimilarityWeights) -> Result<f64, TypeMismatch> {
    if c.kind != c_hat.kind {
        return Err(TypeMismatch(c.kind, c_hat.kind));
    }
    let w = &w.0;
    let human = c.is_human();
    let mut g = w[0];
    if c.flip != c_hat.flip {
        g -= w[1];
    }
    if human && c.expression != c_hat.expression {
        g -= w[2];
    }
    if human && c.pose != c_hat.pose {
        g -= w[3];
    }
    if c.size != c_hat.size {
        g -= w[4];
    }
    g -= w[5] * (c_hat.x - c.x).hypot(c_hat.y - c.y);
    Ok(g)
}

/// Relative-order penalty for a pair of shared types. Ties carry no penalty.
pub fn pairwise_h(ci: &ClipArtPiece, cj: &ClipArtPiece, ci_hat: &ClipArtPiece, cj_hat: &ClipArtPiece, w: &SimilarityWeights) -> f64 {
    let mut h = 0.0;
    if (ci_hat.x - cj_hat.x) * (ci.x - cj.x) < 0.0 {
        h -= w.0[6];
    }
    if (ci_hat.y - cj_hat.y) * (ci.y - cj.y) < 0.0 {
        h -= w.0[7];
    }
    h
}

/// Full similarity with its components. The score is not clamped.
pub fn scene_similarity(truth: &Scene, pred: &Scene, w: &SimilarityWeights) -> SimilarityBreakdown {
    let shared: Vec<(&ClipArtPiece, &ClipArtPiece)> = truth.pieces().filter_map(|c| pred.get(c.kind).map(|c_hat| (c, c_hat))).collect();
    let n_int = shared.len();
    let n_union = truth.len() + pred.len() - n_int;
    if n_union == 0 {
        return SimilarityBreakdown {
            score: w.max_score(),
            n_int: 0,
            n_union: 0,
            unary_total: w.max_score(),
            pairwise_total: 0.0,
            per_type_g: BTreeMap::new(),
        };
    }

    let mut per_type_g = BTreeMap::new();
    let mut g_sum = 0.0;
    for &(c, c_hat) in &shared {
        let g = unary_g(c, c_hat, w).expect("shared pieces have equal types");
        per_type_g.insert(c.kind, g);
        g_sum += g;
    }
    let unary_total = g_sum / n_union as f64;

    let pairwise_total = if n_int < 2 {
        0.0
    } else {
        let mut h_sum = 0.0;
        for (a, &(ci, ci_hat)) in shared.iter().enumerate() {
            for &(cj, cj_hat) in &shared[a + 1..] {
                h_sum += pairwise_h(ci, cj, ci_hat, cj_hat, w);
            }
        }
        h_sum / (n_union as f64 * (n_int - 1) as f64)
    };

    SimilarityBreakdown { score: unary_total + pairwise_total, n_int, n_union, unary_total, pairwise_total, per_type_g }
}

/// Score under the default weights.
pub fn similarity(truth: &Scene, pred: &Scene) -> f64 {
    scene_similarity(truth, pred, &SimilarityWeights::DEFAULT).score
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::testing::*;
    use crate::scene::{Flip, Size};
    use proptest::prelude::*;

    const W: SimilarityWeights = SimilarityWeights::DEFAULT;

    fn scene(pieces: &[ClipArtPiece]) -> Scene {
        Scene::from_pieces(pieces.iter().copied()).unwrap()
    }

    #[test]
    fn iou_examples() {
        let six = scene(&[
            obj("sun", 0.1, 0.1),
            obj("cloud", 0.3, 0.1),
            obj("pine_tree", 0.2, 0.5),
            obj("dog", 0.4, 0.8),
            obj("hot_dog", 0.6, 0.8),
            obj("kite", 0.7, 0.2),
        ]);
        assert_eq!(iou(&six, &six), 1.0);
        assert_eq!(iou(&scene(&[obj("sun", 0.1, 0.1)]), &scene(&[obj("moon", 0.1, 0.1)])), 0.0);
        let mike = ClipArtPiece::human(id("mike"), Flip::FaceLeft, Size::Normal, 0, 0, 0.5, 0.7);
        let a = scene(&[obj("sun", 0.1, 0.1), obj("oak_tree", 0.3, 0.5), mike]);
        let b = scene(&[obj("sun", 0.2, 0.1), mike, obj("soccer_ball", 0.5, 0.9)]);
        assert_eq!(iou(&a, &b), 0.5);
        assert_eq!(iou(&Scene::new(), &Scene::new()), 1.0);
    }

    #[test]
    fn unary_examples() {
        let small = ClipArtPiece::object(id("sun"), Flip::FaceLeft, Size::Small, 0.2, 0.2);
        let large = ClipArtPiece { size: Size::Large, ..small };
        assert_eq!(unary_g(&small, &small, &W).unwrap(), 5.0);
        assert_eq!(unary_g(&small, &large, &W).unwrap(), 4.0);

        let mike = ClipArtPiece::human(id("mike"), Flip::FaceLeft, Size::Normal, 1, 2, 0.5, 0.5);
        let off = ClipArtPiece { flip: Flip::FaceRight, pose: Some(4), expression: Some(0), ..mike };
        assert_eq!(unary_g(&mike, &off, &W).unwrap(), 3.0);

        assert!(unary_g(&small, &obj("moon", 0.2, 0.2), &W).is_err());
    }

    #[test]
    fn pose_and_expression_ignored_for_objects() {
        let a = obj("sun", 0.2, 0.2);
        let b = ClipArtPiece { pose: Some(3), expression: Some(1), ..a };
        assert_eq!(unary_g(&a, &b, &W).unwrap(), 5.0);
    }

    #[test]
    fn pairwise_examples() {
        let (a, b) = (obj("sun", 0.2, 0.1), obj("oak_tree", 0.8, 0.6));
        assert_eq!(pairwise_h(&a, &b, &a, &b, &W), 0.0);
        let b_x = obj("oak_tree", 0.1, 0.6);
        assert_eq!(pairwise_h(&a, &b, &a, &b_x, &W), -1.0);
        let b_xy = obj("oak_tree", 0.1, 0.05);
        assert_eq!(pairwise_h(&a, &b, &a, &b_xy, &W), -2.0);
        let tie = obj("oak_tree", 0.2, 0.1);
        assert_eq!(pairwise_h(&a, &b, &a, &tie, &W), 0.0);
    }

    #[test]
    fn similarity_examples() {
        let c = scene(&[obj("sun", 0.2, 0.1), obj("oak_tree", 0.8, 0.6)]);
        assert_eq!(similarity(&c, &c), 5.0);
        assert_eq!(similarity(&c, &Scene::new()), 0.0);
        assert_eq!(similarity(&Scene::new(), &Scene::new()), 5.0);

        let c_hat = scene(&[obj("sun", 0.2, 0.1), obj("oak_tree", 0.1, 0.6)]);
        let b = scene_similarity(&c, &c_hat, &W);
        assert_eq!((b.n_int, b.n_union), (2, 2));
        assert!((b.unary_total - 4.65).abs() < 1e-12);
        assert!((b.pairwise_total + 0.5).abs() < 1e-12);
        assert!((b.score - 4.15).abs() < 1e-12);
    }

    #[test]
    fn single_shared_type_has_no_pairwise_term() {
        let c = scene(&[obj("sun", 0.2, 0.1), obj("oak_tree", 0.8, 0.6)]);
        let c_hat = scene(&[obj("sun", 0.2, 0.1)]);
        let b = scene_similarity(&c, &c_hat, &W);
        assert_eq!(b.pairwise_total, 0.0);
        assert_eq!(b.score, 2.5);
    }

    #[test]
    fn weights_json() {
        let w: SimilarityWeights = serde_json::from_str("[5,1,0.5,0.5,1,1,1,1]").unwrap();
        assert_eq!(w, W);
        assert!(serde_json::from_str::<SimilarityWeights>("[5,1]").is_err());
        assert!(serde_json::from_str::<SimilarityWeights>("[5,1,0.5,0.5,1,1,1,-1]").is_err());
    }

    proptest! {
        #[test]
        fn breakdown_sums(a in arb_scene(8), b in arb_scene(8)) {
            let s = scene_similarity(&a, &b, &W);
            prop_assert_eq!(s.score, s.unary_total + s.pairwise_total);
            prop_assert!(s.score <= 5.0 + 1e-12);
        }
    }
}
