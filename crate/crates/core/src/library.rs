//! The bundled clip-art library table.
//!
//! The table is versioned data (`data/clipart_library.json`) rather than code so
//! that names, strata and asset paths can be swapped without touching callers.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Number of clip-art types in the library.
pub const NUM_TYPES: usize = 58;
/// Body poses available to the two human types.
pub const NUM_POSES: u8 = 7;
/// Facial expressions available to the two human types.
pub const NUM_EXPRESSIONS: u8 = 5;

pub const LIBRARY_JSON: &str = include_str!("../data/clipart_library.json");

/// Identifier of one of the 58 clip-art types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ClipArtTypeId(u8);

impl ClipArtTypeId {
    pub fn new(id: u8) -> Option<Self> {
        ((id as usize) < NUM_TYPES).then_some(Self(id))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ClipArtTypeId> {
        (0..NUM_TYPES as u8).map(ClipArtTypeId)
    }

    pub fn info(self) -> &'static ClipArtInfo {
        &library().types[self.index()]
    }

    pub fn is_human(self) -> bool {
        self.info().is_human
    }

    pub fn name(self) -> &'static str {
        &self.info().name
    }

    /// Looks a type up by its library name (`"sun"`, `"mike"`, ...).
    pub fn by_name(name: &str) -> Option<Self> {
        library().types.iter().find(|t| t.name == name).map(|t| Self(t.id))
    }
}

impl TryFrom<u8> for ClipArtTypeId {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("clip-art type id {value} out of range 0..{NUM_TYPES}"))
    }
}

impl From<ClipArtTypeId> for u8 {
    fn from(value: ClipArtTypeId) -> Self {
        value.0
    }
}

impl fmt::Display for ClipArtTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.name(), self.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipArtInfo {
    pub id: u8,
    pub name: String,
    pub category: String,
    pub is_human: bool,
    /// Describe-order stratum used by the rule-based teller: 0 sky, 1 large
    /// scenery, 2 people and animals, 3 small items.
    pub teller_stratum: u8,
    pub asset: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CanvasSize {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureLayoutSpec {
    pub version: u32,
    pub flip: usize,
    pub size: usize,
    pub human_flag: usize,
    pub pose_expression: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Library {
    pub version: u32,
    pub canvas: CanvasSize,
    pub feature_layout: FeatureLayoutSpec,
    pub types: Vec<ClipArtInfo>,
}

/// The process-wide library table, parsed once from the embedded data file.
pub fn library() -> &'static Library {
    static LIB: OnceLock<Library> = OnceLock::new();
    LIB.get_or_init(|| {
        let lib: Library = serde_json::from_str(LIBRARY_JSON).expect("embedded clip-art library is valid JSON");
        assert_eq!(lib.types.len(), NUM_TYPES, "library must list {NUM_TYPES} types");
        for (i, t) in lib.types.iter().enumerate() {
            assert_eq!(t.id as usize, i, "library ids must be dense and ordered");
        }
        lib
    })
}
