//! Agents addressed by spec strings: `rb:<partition>`, `script`,
//! `script:<dialog_id>`, `neural:<checkpoint>`, `noop`, `human-replay`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use super::nearest::{NearestNeighborIndex, RuleBasedDrawer, RuleBasedTeller};
use super::{AgentManifest, DrawerAgent, HumanReplayDrawer, NoopDrawer, ScriptedTeller, TellerAgent, TrainedOn};
use crate::dataset::{Corpus, CorpusSplit};
use crate::neural::{CheckpointError, NeuralDrawer};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AgentSpec {
    RuleBased(TrainedOn),
    /// Recorded teller messages of one dialog, or of whichever scene is being played.
    Script(Option<String>),
    Neural(PathBuf),
    Noop,
    HumanReplay,
}

impl FromStr for AgentSpec {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RegistryError::BadSpec(s.to_owned());
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("rb", Some(p)) => match p.parse::<TrainedOn>() {
                Ok(TrainedOn::None) | Err(_) => Err(bad()),
                Ok(t) => Ok(AgentSpec::RuleBased(t)),
            },
            ("script", None) => Ok(AgentSpec::Script(None)),
            ("script", Some(id)) if !id.is_empty() => Ok(AgentSpec::Script(Some(id.to_owned()))),
            ("neural", Some(path)) if !path.is_empty() => Ok(AgentSpec::Neural(PathBuf::from(path))),
            ("noop", None) => Ok(AgentSpec::Noop),
            ("human-replay", None) => Ok(AgentSpec::HumanReplay),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::RuleBased(t) => write!(f, "rb:{t}"),
            AgentSpec::Script(None) => f.write_str("script"),
            AgentSpec::Script(Some(id)) => write!(f, "script:{id}"),
            AgentSpec::Neural(p) => write!(f, "neural:{}", p.display()),
            AgentSpec::Noop => f.write_str("noop"),
            AgentSpec::HumanReplay => f.write_str("human-replay"),
        }
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unrecognised agent spec {0:?}; expected rb:<teller_train|drawer_train>, script[:<dialog_id>], neural:<checkpoint>, noop or human-replay")]
    BadSpec(String),
    #[error("{spec} cannot play the {role}")]
    WrongRole { spec: String, role: &'static str },
    #[error("unknown dialog {0}")]
    UnknownScene(String),
    #[error("script teller needs a dialog id")]
    ScriptNeedsScene,
    #[error("partition {0} has no single-clip-art rounds")]
    EmptyIndex(TrainedOn),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Builds agents over one corpus and split, caching indexes and checkpoints.
pub struct AgentFactory {
    corpus: Arc<Corpus>,
    split: Arc<CorpusSplit>,
    checkpoint_dir: Option<PathBuf>,
    teller_index: OnceLock<Arc<NearestNeighborIndex>>,
    drawer_index: OnceLock<Arc<NearestNeighborIndex>>,
    neural: Mutex<HashMap<PathBuf, Arc<NeuralDrawer>>>,
    human_replay: OnceLock<Arc<HumanReplayDrawer>>,
}

impl AgentFactory {
    pub fn new(corpus: Arc<Corpus>, split: Arc<CorpusSplit>, checkpoint_dir: Option<PathBuf>) -> Self {
        AgentFactory {
            corpus,
            split,
            checkpoint_dir,
            teller_index: OnceLock::new(),
            drawer_index: OnceLock::new(),
            neural: Mutex::new(HashMap::new()),
            human_replay: OnceLock::new(),
        }
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn split(&self) -> &Arc<CorpusSplit> {
        &self.split
    }

    /// Retrieval index over the single-clip-art rounds of a training partition.
    pub fn index(&self, t: TrainedOn) -> Result<Arc<NearestNeighborIndex>, RegistryError> {
        let cell = match t {
            TrainedOn::TellerTrain => &self.teller_index,
            TrainedOn::DrawerTrain => &self.drawer_index,
            TrainedOn::None => return Err(RegistryError::EmptyIndex(t)),
        };
        let idx = cell.get_or_init(|| {
            let part = t.partition().expect("training partition");
            Arc::new(NearestNeighborIndex::build(self.corpus.subset(self.split.get(part)), t))
        });
        if idx.is_empty() {
            return Err(RegistryError::EmptyIndex(t));
        }
        Ok(Arc::clone(idx))
    }

    fn checkpoint_path(&self, p: &Path) -> PathBuf {
        match &self.checkpoint_dir {
            Some(dir) if p.is_relative() && !p.exists() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn neural(&self, p: &Path) -> Result<Arc<NeuralDrawer>, RegistryError> {
        let path = self.checkpoint_path(p);
        let mut cache = self.neural.lock().expect("cache lock");
        if let Some(d) = cache.get(&path) {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(NeuralDrawer::load(&path)?);
        cache.insert(path, Arc::clone(&d));
        Ok(d)
    }

    /// A teller for `spec`; `scene_id` selects the script when the spec names none.
    pub fn teller(&self, spec: &AgentSpec, scene_id: Option<&str>) -> Result<Arc<dyn TellerAgent>, RegistryError> {
        match spec {
            AgentSpec::RuleBased(t) => Ok(Arc::new(RuleBasedTeller::new(self.index(*t)?))),
            AgentSpec::Script(id) => {
                let id = id.as_deref().or(scene_id).ok_or(RegistryError::ScriptNeedsScene)?;
                let t = self.corpus.get(id).ok_or_else(|| RegistryError::UnknownScene(id.to_owned()))?;
                Ok(Arc::new(ScriptedTeller::new(t)))
            }
            _ => Err(RegistryError::WrongRole { spec: spec.to_string(), role: "teller" }),
        }
    }

    /// Manifest of the teller `spec` builds, without needing a scene.
    pub fn teller_manifest(&self, spec: &AgentSpec) -> Result<AgentManifest, RegistryError> {
        match spec {
            AgentSpec::Script(None) => Ok(AgentManifest::untrained("script")),
            _ => Ok(self.teller(spec, None)?.manifest().clone()),
        }
    }

    pub fn drawer(&self, spec: &AgentSpec) -> Result<Arc<dyn DrawerAgent>, RegistryError> {
        match spec {
            AgentSpec::RuleBased(t) => Ok(Arc::new(RuleBasedDrawer::new(self.index(*t)?))),
            AgentSpec::Neural(p) => Ok(self.neural(p)?),
            AgentSpec::Noop => Ok(Arc::new(NoopDrawer::default())),
            AgentSpec::HumanReplay => {
                Ok(self.human_replay.get_or_init(|| Arc::new(HumanReplayDrawer::new(self.corpus.transcripts()))).clone())
            }
            AgentSpec::Script(_) => Err(RegistryError::WrongRole { spec: spec.to_string(), role: "drawer" }),
        }
    }
}
