//! Script-based and machine-machine evaluation.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentManifest, DrawerAgent, DrawerContext, TellerAgent, TrainedOn};
use crate::dataset::{DialogTranscript, Message, Partition};
use crate::engine::{similarity_by_round, GameConfig, GameState, Role};
use crate::metric::similarity;
use crate::scene::Scene;

/// Rounds in the padded curve.
pub const PADDED_ROUNDS: usize = 35;

/// Round cap for machine-machine games.
pub const DEFAULT_PAIR_MAX_ROUNDS: usize = 50;

/// A published result, kept for context next to our numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedRow {
    pub setting: &'static str,
    pub teller: &'static str,
    pub drawer: &'static str,
    pub similarity: f64,
}

pub const PUBLISHED_RESULTS: [PublishedRow; 12] = [
    PublishedRow { setting: "script", teller: "Script", drawer: "Rule-Based Nearest Neighbor", similarity: 0.94 },
    PublishedRow { setting: "script", teller: "Script", drawer: "Neural Network", similarity: 3.39 },
    PublishedRow { setting: "script", teller: "Script", drawer: "Human", similarity: 3.83 },
    PublishedRow { setting: "human-machine", teller: "Rule-based Nearest Neighbor", drawer: "Human", similarity: 3.21 },
    PublishedRow { setting: "human-machine", teller: "Scene2seq", drawer: "Human", similarity: 2.69 },
    PublishedRow { setting: "human-machine", teller: "Scene2seq + auxiliary loss", drawer: "Human", similarity: 3.04 },
    PublishedRow { setting: "human-machine", teller: "Scene2seq + RL fine-tuning", drawer: "Human", similarity: 3.65 },
    PublishedRow { setting: "machine-machine", teller: "Rule-based Nearest Neighbor", drawer: "Neural Network", similarity: 3.08 },
    PublishedRow { setting: "machine-machine", teller: "Scene2seq", drawer: "Neural Network", similarity: 2.67 },
    PublishedRow { setting: "machine-machine", teller: "Scene2seq + auxiliary loss", drawer: "Neural Network", similarity: 3.02 },
    PublishedRow { setting: "machine-machine", teller: "Scene2seq + RL fine-tuning", drawer: "Neural Network", similarity: 3.67 },
    PublishedRow { setting: "human-human", teller: "Human", drawer: "Human", similarity: 4.17 },
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("crosstalk violation: teller and drawer were both trained on {0}")]
pub struct CrosstalkViolation(pub Partition);

/// Agents pass unless both were trained on the same partition.
pub fn enforce_crosstalk(teller: &AgentManifest, drawer: &AgentManifest) -> Result<(), CrosstalkViolation> {
    match (teller.trained_on, drawer.trained_on) {
        (TrainedOn::None, _) | (_, TrainedOn::None) => Ok(()),
        (a, b) if a == b => Err(CrosstalkViolation(a.partition().expect("trained"))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub scene_id: String,
    pub similarity: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub mean: f64,
    pub dialogs: usize,
}

/// Mean similarity after each round. `truncated[k-1]` averages only dialogs
/// with at least `k` rounds; `padded[k-1]` holds every dialog at its final
/// canvas once it has ended, for `k` in `1..=35`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundCurves {
    pub round0: f64,
    pub truncated: Vec<CurvePoint>,
    pub padded: Vec<f64>,
}

/// `per_dialog[i][k]` is the similarity after round `k`, index 0 being the empty canvas.
pub fn per_round_curves(per_dialog: &[Vec<f64>]) -> RoundCurves {
    let n = per_dialog.len();
    if n == 0 {
        return RoundCurves { round0: 0.0, truncated: Vec::new(), padded: vec![0.0; PADDED_ROUNDS] };
    }
    let round0 = per_dialog.iter().map(|s| s[0]).sum::<f64>() / n as f64;
    let longest = per_dialog.iter().map(|s| s.len() - 1).max().unwrap_or(0);
    let truncated = (1..=longest)
        .map(|k| {
            let vals: Vec<f64> = per_dialog.iter().filter_map(|s| s.get(k).copied()).collect();
            CurvePoint { round: k, mean: vals.iter().sum::<f64>() / vals.len() as f64, dialogs: vals.len() }
        })
        .collect();
    let padded = (1..=PADDED_ROUNDS).map(|k| per_dialog.iter().map(|s| s[k.min(s.len() - 1)]).sum::<f64>() / n as f64).collect();
    RoundCurves { round0, truncated, padded }
}

/// Curves of the recorded human canvases.
pub fn corpus_curves<'a>(transcripts: impl IntoIterator<Item = &'a DialogTranscript>) -> RoundCurves {
    let per: Vec<Vec<f64>> = transcripts.into_iter().map(similarity_by_round).collect();
    per_round_curves(&per)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub teller: Option<AgentManifest>,
    pub drawer: AgentManifest,
    #[serde(default)]
    pub split_fingerprint: Option<String>,
    #[serde(default)]
    pub codebook_override: bool,
    pub scenes: Vec<SceneScore>,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub curves: RoundCurves,
}

impl EvalReport {
    fn build(condition: String, teller: Option<AgentManifest>, drawer: AgentManifest, runs: Vec<(SceneScore, Vec<f64>)>) -> Self {
        let (scenes, per_round): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
        let vals: Vec<f64> = scenes.iter().map(|s| s.similarity).collect();
        let (mean, median, std) = summary(&vals);
        EvalReport {
            condition,
            teller,
            drawer,
            split_fingerprint: None,
            codebook_override: false,
            scenes,
            mean,
            median,
            std,
            curves: per_round_curves(&per_round),
        }
    }

    /// Identifier for file names, derived from the agents and scenes evaluated.
    pub fn fingerprint(&self) -> String {
        let ids: Vec<&str> = self.scenes.iter().map(|s| s.scene_id.as_str()).collect();
        let teller = self.teller.as_ref().map(|m| serde_json::to_string(m).expect("manifest serializes")).unwrap_or_default();
        let drawer = serde_json::to_string(&self.drawer).expect("manifest serializes");
        let joined = ids.join(",");
        crate::fingerprint::combine([self.condition.as_str(), &teller, &drawer, &joined, self.split_fingerprint.as_deref().unwrap_or("")])
    }
}

/// Mean, median and population standard deviation; zeros when empty.
pub fn summary(vals: &[f64]) -> (f64, f64, f64) {
    if vals.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = vals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0 };
    (mean, median, var.sqrt())
}

fn run_parallel<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}

/// Canvas after each round when `drawer` follows the recorded teller messages
/// of `t` from an empty canvas. Actions the canvas rejects are dropped.
pub fn script_canvases(drawer: &dyn DrawerAgent, t: &DialogTranscript) -> Vec<Scene> {
    let mut canvases = vec![Scene::new()];
    for (round, r) in t.rounds.iter().enumerate() {
        let canvas = canvases.last().expect("nonempty");
        let turn = drawer.act_in(&DrawerContext { scene_id: &t.scene_id, round, message: &r.teller, canvas });
        let next = canvas.apply(&turn.action).unwrap_or_else(|_| canvas.clone());
        canvases.push(next);
    }
    canvases
}

/// Feeds each dialog's recorded teller messages to `drawer` and scores the final canvas.
pub fn eval_script_drawer<'a>(
    drawer: &dyn DrawerAgent,
    transcripts: impl IntoIterator<Item = &'a DialogTranscript>,
    jobs: usize,
) -> EvalReport {
    let ts: Vec<&DialogTranscript> = transcripts.into_iter().collect();
    let runs = run_parallel(&ts, jobs, |t| {
        let per_round: Vec<f64> = script_canvases(drawer, t).iter().map(|c| similarity(&t.target, c)).collect();
        let score = SceneScore { scene_id: t.scene_id.clone(), similarity: *per_round.last().expect("nonempty"), rounds: t.rounds.len() };
        (score, per_round)
    });
    EvalReport::build(format!("script x {}", drawer.manifest().agent_kind), None, drawer.manifest().clone(), runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub max_rounds: usize,
    /// Permits same-partition agents, for reproducing the codebook effect.
    pub allow_codebook: bool,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig { max_rounds: DEFAULT_PAIR_MAX_ROUNDS, allow_codebook: false }
    }
}

fn truncate_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Plays one machine-machine game through the dialog engine.
pub fn play_pair(
    teller: &dyn TellerAgent,
    drawer: &dyn DrawerAgent,
    scene_id: &str,
    target: &Scene,
    max_rounds: usize,
) -> DialogTranscript {
    let config = GameConfig { max_rounds, ..GameConfig::default() };
    let mut game = GameState::new_session(scene_id, target.clone(), config).expect("non-empty target");
    let mut history: Vec<String> = Vec::new();
    while game.rounds().len() < max_rounds {
        let Some(text) = teller.next_message(target, &history) else { break };
        let text = truncate_chars(&text, game.config().max_message_chars).to_owned();
        game.submit_message(Role::Teller, &text).expect("teller turn");
        let message = Message::from_text(text.clone());
        history.push(text);
        let round = game.rounds().len();
        let turn = drawer.act_in(&DrawerContext { scene_id, round, message: &message, canvas: game.canvas() });
        if !turn.action.is_empty() {
            // A rejected action leaves the canvas unchanged.
            let _ = game.submit_action(&turn.action);
        }
        let reply = truncate_chars(&turn.reply, game.config().max_message_chars).to_owned();
        game.submit_message(Role::Drawer, &reply).expect("drawer turn");
    }
    game.finish(Role::Teller).expect("open session")
}

/// Pairs a teller with a drawer on each target scene.
pub fn eval_pair(
    teller: &(dyn Fn(&str) -> Arc<dyn TellerAgent> + Sync),
    teller_manifest: &AgentManifest,
    drawer: &dyn DrawerAgent,
    scenes: &[(String, Scene)],
    config: &PairConfig,
    jobs: usize,
) -> Result<EvalReport, CrosstalkViolation> {
    if let Err(v) = enforce_crosstalk(teller_manifest, drawer.manifest()) {
        if !config.allow_codebook {
            return Err(v);
        }
    }
    let runs = run_parallel(scenes, jobs, |(id, target)| {
        let t = play_pair(teller(id).as_ref(), drawer, id, target, config.max_rounds);
        let per_round = similarity_by_round(&t);
        let score = SceneScore { scene_id: id.clone(), similarity: *per_round.last().expect("nonempty"), rounds: t.rounds.len() };
        (score, per_round)
    });
    let condition = format!("{} x {}", teller_manifest.agent_kind, drawer.manifest().agent_kind);
    let mut report = EvalReport::build(condition, Some(teller_manifest.clone()), drawer.manifest().clone(), runs);
    report.codebook_override = config.allow_codebook && enforce_crosstalk(teller_manifest, drawer.manifest()).is_err();
    Ok(report)
}

/// Markdown summary in the shape of the published results table, followed by
/// the published rows for context.
pub fn render_markdown(report: &EvalReport) -> String {
    let mut s = String::new();
    let teller = report.teller.as_ref().map_or("script".to_owned(), |m| describe(m));
    writeln!(s, "# {}\n", report.condition).unwrap();
    writeln!(s, "| Teller | Drawer | Scene similarity |").unwrap();
    writeln!(s, "|---|---|---|").unwrap();
    writeln!(s, "| {} | {} | {:.2} |\n", teller, describe(&report.drawer), report.mean).unwrap();
    writeln!(s, "- scenes: {}", report.scenes.len()).unwrap();
    writeln!(s, "- mean: {:.4}, median: {:.4}, std: {:.4}", report.mean, report.median, report.std).unwrap();
    if let Some(fp) = &report.split_fingerprint {
        writeln!(s, "- split fingerprint: {fp}").unwrap();
    }
    if report.codebook_override {
        writeln!(s, "- crosstalk override: agents share a training partition").unwrap();
    }
    writeln!(s, "\n## Published results (reference only)\n").unwrap();
    writeln!(s, "| Setting | Teller | Drawer | Scene similarity |").unwrap();
    writeln!(s, "|---|---|---|---|").unwrap();
    for r in PUBLISHED_RESULTS {
        writeln!(s, "| {} | {} | {} | {:.2} |", r.setting, r.teller, r.drawer, r.similarity).unwrap();
    }
    s
}

fn describe(m: &AgentManifest) -> String {
    match m.trained_on {
        TrainedOn::None => m.agent_kind.clone(),
        t => format!("{} ({})", m.agent_kind, t),
    }
}

/// One row per scene: `scene_id,similarity,rounds`.
pub fn render_csv(report: &EvalReport) -> String {
    let mut s = String::from("scene_id,similarity,rounds\n");
    for r in &report.scenes {
        writeln!(s, "{},{:.6},{}", r.scene_id, r.similarity, r.rounds).unwrap();
    }
    s
}

/// Curve table: `round,padded_mean,truncated_mean,truncated_dialogs`.
pub fn render_curves_csv(c: &RoundCurves) -> String {
    let mut s = String::from("round,padded_mean,truncated_mean,truncated_dialogs\n");
    writeln!(s, "0,{:.6},{:.6},", c.round0, c.round0).unwrap();
    let longest = c.truncated.len().max(c.padded.len());
    for k in 1..=longest {
        let padded = c.padded.get(k - 1).map(|v| format!("{v:.6}")).unwrap_or_default();
        let (tm, td) = c.truncated.get(k - 1).map(|p| (format!("{:.6}", p.mean), p.dialogs.to_string())).unwrap_or_default();
        writeln!(s, "{k},{padded},{tm},{td}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{HumanReplayDrawer, NoopDrawer, ScriptedTeller};
    use crate::dataset::official::{import_release, ImportOptions};
    use crate::dataset::synth::{generate_release, SynthConfig};
    use std::sync::Arc;

    fn manifest(t: TrainedOn) -> AgentManifest {
        AgentManifest { agent_kind: "x".into(), trained_on: t, data_fingerprint: String::new() }
    }

    fn corpus() -> crate::dataset::Corpus {
        let cfg = SynthConfig { train: 10, val: 4, test: 6, ..SynthConfig::default() };
        import_release(&generate_release(&cfg), &ImportOptions::default()).unwrap().0
    }

    #[test]
    fn crosstalk_rules() {
        use TrainedOn::*;
        assert!(enforce_crosstalk(&manifest(TellerTrain), &manifest(DrawerTrain)).is_ok());
        assert_eq!(enforce_crosstalk(&manifest(TellerTrain), &manifest(TellerTrain)), Err(CrosstalkViolation(Partition::TellerTrain)));
        assert!(enforce_crosstalk(&manifest(None), &manifest(DrawerTrain)).is_ok());
        assert!(enforce_crosstalk(&manifest(None), &manifest(None)).is_ok());
    }

    #[test]
    fn noop_drawer_scores_zero() {
        let c = corpus();
        let r = eval_script_drawer(&NoopDrawer::default(), c.transcripts(), 1);
        assert_eq!(r.scenes.len(), c.len());
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.curves.round0, 0.0);
    }

    #[test]
    fn human_replay_drawer_reproduces_recorded_scores() {
        let c = corpus();
        let r = eval_script_drawer(&HumanReplayDrawer::new(c.transcripts()), c.transcripts(), 2);
        for (s, t) in r.scenes.iter().zip(c.transcripts()) {
            assert_eq!(s.similarity, similarity(&t.target, &t.final_canvas()));
        }
        assert_eq!(r.curves, corpus_curves(c.transcripts()));
    }

    #[test]
    fn scripted_teller_with_noop_drawer_pairs_to_zero() {
        let c = corpus();
        let scenes: Vec<(String, Scene)> = c.transcripts().iter().map(|t| (t.scene_id.clone(), t.target.clone())).collect();
        let make = |id: &str| Arc::new(ScriptedTeller::new(c.get(id).unwrap())) as Arc<dyn TellerAgent>;
        let r = eval_pair(&make, &AgentManifest::untrained("script"), &NoopDrawer::default(), &scenes, &PairConfig::default(), 1).unwrap();
        assert_eq!(r.mean, 0.0);
        for (s, t) in r.scenes.iter().zip(c.transcripts()) {
            assert_eq!(s.rounds, t.teller_messages().count());
        }
    }

    #[test]
    fn curves_truncate_and_pad() {
        let c = per_round_curves(&[vec![0.0, 1.0, 2.0], vec![0.0, 3.0]]);
        assert_eq!(c.round0, 0.0);
        assert_eq!(c.truncated.len(), 2);
        assert_eq!(c.truncated[0], CurvePoint { round: 1, mean: 2.0, dialogs: 2 });
        assert_eq!(c.truncated[1], CurvePoint { round: 2, mean: 2.0, dialogs: 1 });
        assert_eq!(c.padded.len(), PADDED_ROUNDS);
        assert_eq!(c.padded[0], 2.0);
        assert_eq!(c.padded[34], 2.5);
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(summary(&[1.0, 3.0]), (2.0, 2.0, 1.0));
        assert_eq!(summary(&[5.0, 1.0, 3.0]).1, 3.0);
        assert_eq!(summary(&[]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rendering_is_deterministic_and_complete() {
        let c = corpus();
        let r = eval_script_drawer(&HumanReplayDrawer::new(c.transcripts()), c.transcripts(), 1);
        let csv = render_csv(&r);
        assert_eq!(csv.lines().count(), c.len() + 1);
        assert_eq!(csv, render_csv(&eval_script_drawer(&HumanReplayDrawer::new(c.transcripts()), c.transcripts(), 3)));
        let md = render_markdown(&r);
        assert!(md.contains(&format!("| {:.2} |", r.mean)));
        assert!(md.contains("4.17"));
        assert_eq!(render_curves_csv(&r.curves).lines().count(), 2 + r.curves.truncated.len().max(PADDED_ROUNDS));
    }
}
