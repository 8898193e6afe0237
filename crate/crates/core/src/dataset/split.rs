//! Crosstalk partitions: teller training, drawer training, dev and test.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Corpus, DatasetError};
use crate::fingerprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    TellerTrain,
    DrawerTrain,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 4] = [Partition::TellerTrain, Partition::DrawerTrain, Partition::Dev, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::TellerTrain => "teller_train",
            Partition::DrawerTrain => "drawer_train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "teller_train" => Ok(Partition::TellerTrain),
            "drawer_train" => Ok(Partition::DrawerTrain),
            "dev" | "val" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            _ => Err(format!("unknown partition {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    /// `official` or `hash:<seed>`.
    pub source: String,
    pub teller_train: BTreeSet<String>,
    pub drawer_train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl CorpusSplit {
    pub fn get(&self, p: Partition) -> &BTreeSet<String> {
        match p {
            Partition::TellerTrain => &self.teller_train,
            Partition::DrawerTrain => &self.drawer_train,
            Partition::Dev => &self.dev,
            Partition::Test => &self.test,
        }
    }

    pub fn partition_of(&self, scene_id: &str) -> Option<Partition> {
        Partition::ALL.into_iter().find(|&p| self.get(p).contains(scene_id))
    }

    pub fn sizes(&self) -> [usize; 4] {
        Partition::ALL.map(|p| self.get(p).len())
    }

    pub fn fingerprint(&self) -> String {
        let joined: Vec<String> = Partition::ALL.iter().map(|&p| self.get(p).iter().cloned().collect::<Vec<_>>().join(",")).collect();
        fingerprint::combine(joined.iter().map(String::as_str))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let json = serde_json::to_string_pretty(self).expect("split serializes");
        std::fs::write(path, json).map_err(|e| DatasetError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<CorpusSplit, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Schema {
            path: path.to_path_buf(),
            record: "split".into(),
            message: e.to_string(),
        })
    }
}

fn seeded_hash(seed: u64, scene_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scene_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Splits the corpus into teller/drawer/dev/test.
///
/// With `respect_official` and release labels on every transcript, `val` and
/// `test` are kept and the sorted `train` ids are halved (the first half, of
/// size `floor(n / 2)`, goes to the teller). Otherwise scene ids are ordered by
/// a seeded hash and cut 40/40/10/10.
pub fn split_crosstalk(corpus: &Corpus, respect_official: bool, seed: u64) -> CorpusSplit {
    let labelled = !corpus.is_empty() && corpus.transcripts().iter().all(|t| t.official_split.is_some());
    if respect_official && labelled {
        let mut train = Vec::new();
        let mut split = CorpusSplit {
            source: "official".into(),
            teller_train: BTreeSet::new(),
            drawer_train: BTreeSet::new(),
            dev: BTreeSet::new(),
            test: BTreeSet::new(),
        };
        for t in corpus.transcripts() {
            match t.official_split.as_deref() {
                Some("val" | "dev") => {
                    split.dev.insert(t.scene_id.clone());
                }
                Some("test") => {
                    split.test.insert(t.scene_id.clone());
                }
                _ => train.push(t.scene_id.clone()),
            }
        }
        train.sort();
        let half = train.len() / 2;
        split.drawer_train = train.split_off(half).into_iter().collect();
        split.teller_train = train.into_iter().collect();
        return split;
    }

    let mut ids: Vec<(u64, &str)> = corpus.transcripts().iter().map(|t| (seeded_hash(seed, &t.scene_id), t.scene_id.as_str())).collect();
    ids.sort();
    let n = ids.len();
    let held_out = (n as f64 * 0.1).round() as usize;
    let teller = (n - 2 * held_out) / 2;
    let mut it = ids.into_iter().map(|(_, id)| id.to_owned());
    let teller_train = it.by_ref().take(teller).collect();
    let dev = it.by_ref().take(held_out).collect();
    let test = it.by_ref().take(held_out).collect();
    let drawer_train = it.collect();
    CorpusSplit { source: format!("hash:{seed}"), teller_train, drawer_train, dev, test }
}
