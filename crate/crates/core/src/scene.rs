//! Clip-art pieces, scenes and canvas edits.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::library::{ClipArtTypeId, NUM_EXPRESSIONS, NUM_POSES, NUM_TYPES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Flip {
    FaceLeft,
    FaceRight,
}

impl Flip {
    pub const ALL: [Flip; 2] = [Flip::FaceLeft, Flip::FaceRight];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Size {
    Small,
    Normal,
    Large,
}

impl Size {
    pub const ALL: [Size; 3] = [Size::Small, Size::Normal, Size::Large];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One placed clip-art object. Coordinates are canvas fractions; values
/// outside `[0, 1]` are legal and describe partially visible pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipArtPiece {
    #[serde(rename = "type")]
    pub kind: ClipArtTypeId,
    pub flip: Flip,
    pub size: Size,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<u8>,
    pub x: f64,
    pub y: f64,
}

impl ClipArtPiece {
    /// A non-human piece. For humans use [`ClipArtPiece::human`].
    pub fn object(kind: ClipArtTypeId, flip: Flip, size: Size, x: f64, y: f64) -> Self {
        Self { kind, flip, size, pose: None, expression: None, x, y }
    }

    pub fn human(kind: ClipArtTypeId, flip: Flip, size: Size, pose: u8, expression: u8, x: f64, y: f64) -> Self {
        Self { kind, flip, size, pose: Some(pose), expression: Some(expression), x, y }
    }

    pub fn is_human(&self) -> bool {
        self.kind.is_human()
    }

    fn check(&self) -> Result<(), SceneError> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(SceneError::NonFiniteCoordinate(self.kind));
        }
        if self.pose.is_some_and(|p| p >= NUM_POSES) || self.expression.is_some_and(|e| e >= NUM_EXPRESSIONS) {
            return Err(SceneError::AttributeOutOfRange(self.kind));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("clip-art type {0} occurs more than once")]
    DuplicateType(ClipArtTypeId),
    #[error("clip-art type {0} has a non-finite coordinate")]
    NonFiniteCoordinate(ClipArtTypeId),
    #[error("clip-art type {0} has a pose or expression out of range")]
    AttributeOutOfRange(ClipArtTypeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("cannot add {0}: already on the canvas")]
    DuplicateAdd(ClipArtTypeId),
    #[error("cannot remove {0}: not on the canvas")]
    MissingRemove(ClipArtTypeId),
    #[error("cannot edit {0}: not on the canvas")]
    MissingEdit(ClipArtTypeId),
    #[error("piece {0} is malformed")]
    InvalidPiece(ClipArtTypeId),
}

impl ActionError {
    pub fn type_id(&self) -> ClipArtTypeId {
        match *self {
            ActionError::DuplicateAdd(t) | ActionError::MissingRemove(t) | ActionError::MissingEdit(t) | ActionError::InvalidPiece(t) => t,
        }
    }
}

/// A set of clip-art pieces with at most one piece per type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClipArtPiece>", into = "Vec<ClipArtPiece>")]
pub struct Scene {
    pieces: BTreeMap<ClipArtTypeId, ClipArtPiece>,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pieces<I: IntoIterator<Item = ClipArtPiece>>(pieces: I) -> Result<Self, SceneError> {
        let mut map = BTreeMap::new();
        for p in pieces {
            p.check()?;
            if map.insert(p.kind, p).is_some() {
                return Err(SceneError::DuplicateType(p.kind));
            }
        }
        Ok(Self { pieces: map })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn get(&self, kind: ClipArtTypeId) -> Option<&ClipArtPiece> {
        self.pieces.get(&kind)
    }

    pub fn contains(&self, kind: ClipArtTypeId) -> bool {
        self.pieces.contains_key(&kind)
    }

    /// Pieces in ascending type-id order.
    pub fn pieces(&self) -> impl ExactSizeIterator<Item = &ClipArtPiece> + '_ {
        self.pieces.values()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = ClipArtTypeId> + '_ {
        self.pieces.keys().copied()
    }

    /// Inserts a piece, replacing any existing piece of the same type.
    pub fn upsert(&mut self, piece: ClipArtPiece) -> Option<ClipArtPiece> {
        self.pieces.insert(piece.kind, piece)
    }

    pub fn remove(&mut self, kind: ClipArtTypeId) -> Option<ClipArtPiece> {
        self.pieces.remove(&kind)
    }

    /// Applies removes, then edits, then adds. `self` is left untouched.
    pub fn apply(&self, action: &DrawerAction) -> Result<Scene, ActionError> {
        let mut next = self.clone();
        for &kind in &action.removes {
            if next.pieces.remove(&kind).is_none() {
                return Err(ActionError::MissingRemove(kind));
            }
        }
        for edit in &action.edits {
            edit.check().map_err(|_| ActionError::InvalidPiece(edit.kind))?;
            match next.pieces.get_mut(&edit.kind) {
                Some(slot) => *slot = *edit,
                None => return Err(ActionError::MissingEdit(edit.kind)),
            }
        }
        for add in &action.adds {
            add.check().map_err(|_| ActionError::InvalidPiece(add.kind))?;
            if next.pieces.insert(add.kind, *add).is_some() {
                return Err(ActionError::DuplicateAdd(add.kind));
            }
        }
        Ok(next)
    }

    /// Warnings for a well-typed scene: off-canvas coordinates and human
    /// pieces without pose/expression (or non-humans carrying them).
    pub fn validate(&self) -> Vec<SceneWarning> {
        let mut out = Vec::new();
        for p in self.pieces.values() {
            if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
                out.push(SceneWarning::OffCanvas { kind: p.kind, x: p.x, y: p.y });
            }
            if p.is_human() && (p.pose.is_none() || p.expression.is_none()) {
                out.push(SceneWarning::MissingHumanAttributes(p.kind));
            }
            if !p.is_human() && (p.pose.is_some() || p.expression.is_some()) {
                out.push(SceneWarning::UnexpectedHumanAttributes(p.kind));
            }
        }
        out
    }

    /// Canonical JSON, used for fingerprints.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }
}

impl TryFrom<Vec<ClipArtPiece>> for Scene {
    type Error = SceneError;

    fn try_from(value: Vec<ClipArtPiece>) -> Result<Self, Self::Error> {
        Scene::from_pieces(value)
    }
}

impl From<Scene> for Vec<ClipArtPiece> {
    fn from(value: Scene) -> Self {
        value.pieces.into_values().collect()
    }
}

impl<'a> IntoIterator for &'a Scene {
    type Item = &'a ClipArtPiece;
    type IntoIter = std::collections::btree_map::Values<'a, ClipArtTypeId, ClipArtPiece>;

    fn into_iter(self) -> Self::IntoIter {
        self.pieces.values()
    }
}

/// Validates a raw piece list, as it arrives from files or clients.
///
/// Two pieces of the same type are a hard error; everything else is reported
/// as a warning.
pub fn validate_scene(pieces: &[ClipArtPiece]) -> Result<Vec<SceneWarning>, SceneError> {
    Ok(Scene::from_pieces(pieces.iter().copied())?.validate())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SceneWarning {
    OffCanvas { kind: ClipArtTypeId, x: f64, y: f64 },
    MissingHumanAttributes(ClipArtTypeId),
    UnexpectedHumanAttributes(ClipArtTypeId),
}

impl fmt::Display for SceneWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneWarning::OffCanvas { kind, x, y } => write!(f, "{kind} is off-canvas at ({x}, {y})"),
            SceneWarning::MissingHumanAttributes(k) => write!(f, "{k} is missing pose or expression"),
            SceneWarning::UnexpectedHumanAttributes(k) => write!(f, "{k} is not human but has pose or expression"),
        }
    }
}

/// One turn's worth of canvas edits. Edits carry the full replacement piece.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DrawerAction {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adds: Vec<ClipArtPiece>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removes: Vec<ClipArtTypeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edits: Vec<ClipArtPiece>,
}

impl DrawerAction {
    pub fn add(piece: ClipArtPiece) -> Self {
        Self { adds: vec![piece], ..Self::default() }
    }

    pub fn remove(kind: ClipArtTypeId) -> Self {
        Self { removes: vec![kind], ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.adds.is_empty() && self.removes.is_empty() && self.edits.is_empty()
    }

    /// The action that undoes `self` when applied to `before.apply(self)`.
    pub fn inverse(&self, before: &Scene) -> Result<DrawerAction, ActionError> {
        let removes = self.adds.iter().map(|p| p.kind).collect();
        let mut edits = Vec::with_capacity(self.edits.len());
        for e in &self.edits {
            edits.push(*before.get(e.kind).ok_or(ActionError::MissingEdit(e.kind))?);
        }
        let mut adds = Vec::with_capacity(self.removes.len());
        for &r in &self.removes {
            adds.push(*before.get(r).ok_or(ActionError::MissingRemove(r))?);
        }
        Ok(DrawerAction { adds, removes, edits })
    }

    /// The action that turns `before` into `after`: removes for vanished
    /// types, edits for changed pieces, adds for new types.
    pub fn diff(before: &Scene, after: &Scene) -> DrawerAction {
        let mut action = DrawerAction::default();
        for p in before.pieces() {
            match after.get(p.kind) {
                None => action.removes.push(p.kind),
                Some(q) if q != p => action.edits.push(*q),
                Some(_) => {}
            }
        }
        action.adds = after.pieces().filter(|p| !before.contains(p.kind)).copied().collect();
        action
    }
}

/// Layout of the per-type canvas feature slot: presence bit, the 41 binary
/// attribute features, then x and y.
pub mod features {
    use super::*;

    pub const NUM_BINARY_FEATURES: usize = 41;
    pub const SLOT_WIDTH: usize = 1 + NUM_BINARY_FEATURES + 2;
    pub const CANVAS_VECTOR_LEN: usize = NUM_TYPES * SLOT_WIDTH;

    pub const PRESENCE: usize = 0;
    pub const FLIP: usize = 1;
    pub const SIZE: usize = FLIP + 2;
    pub const HUMAN_FLAG: usize = SIZE + 3;
    /// Joint one-hot at `expression * NUM_POSES + pose`.
    pub const POSE_EXPRESSION: usize = HUMAN_FLAG + 1;
    pub const X: usize = POSE_EXPRESSION + (NUM_POSES * NUM_EXPRESSIONS) as usize;
    pub const Y: usize = X + 1;

    const _: () = assert!(Y + 1 == SLOT_WIDTH);

    /// Writes one piece's slot into `slot` (length [`SLOT_WIDTH`]).
    pub fn encode_piece(piece: &ClipArtPiece, slot: &mut [f64]) {
        debug_assert_eq!(slot.len(), SLOT_WIDTH);
        slot.fill(0.0);
        slot[PRESENCE] = 1.0;
        slot[FLIP + piece.flip.index()] = 1.0;
        slot[SIZE + piece.size.index()] = 1.0;
        if piece.is_human() {
            slot[HUMAN_FLAG] = 1.0;
            if let (Some(pose), Some(expr)) = (piece.pose, piece.expression) {
                slot[POSE_EXPRESSION + (expr * NUM_POSES + pose) as usize] = 1.0;
            }
        }
        slot[X] = piece.x;
        slot[Y] = piece.y;
    }

    pub fn canvas_feature_vector(scene: &Scene) -> Vec<f64> {
        let mut v = vec![0.0; CANVAS_VECTOR_LEN];
        for p in scene.pieces() {
            let start = p.kind.index() * SLOT_WIDTH;
            encode_piece(p, &mut v[start..start + SLOT_WIDTH]);
        }
        v
    }
}

pub use features::canvas_feature_vector;
