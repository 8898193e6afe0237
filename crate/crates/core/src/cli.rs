//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 crosstalk violation.
//! Failures print a single `error[<code>]: <message>` line on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::{AgentFactory, AgentSpec, TellerAgent};
use crate::dataset::official::{import_official, ImportOptions};
use crate::dataset::synth::{write_release, SynthConfig};
use crate::dataset::{corpus_stats, split_crosstalk, Corpus, CorpusSplit, DatasetError, Partition};
use crate::engine::{replay, similarity_by_round, GameConfig};
use crate::eval::{self, EvalReport, PairConfig};
use crate::fingerprint;
use crate::metric::{scene_similarity, SimilarityWeights};
use crate::neural::{train_drawer, Hyper};
use crate::scene::Scene;
use crate::service::{AppState, TranscriptStore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CROSSTALK: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "codraw", version, about = "Collaborative clip-art drawing game toolkit")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info", env = "CODRAW_LOG")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import release JSON files into the internal JSONL corpus.
    Ingest {
        /// Directory containing the release `*.json` files.
        #[arg(long)]
        release: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the import manifest; defaults to `<out>.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Corpus statistics.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = StatsFormat::Text)]
        format: StatsFormat,
    },
    /// Partition the corpus into teller_train, drawer_train, dev and test.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Ignore release split labels and cut by seeded hash.
        #[arg(long)]
        hash: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity between two scene files (JSON lists of pieces).
    Similarity {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// JSON array of the eight metric weights.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        breakdown: bool,
    },
    /// Train the neural drawer on drawer_train.
    TrainDrawer {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        seed: u64,
        /// Output file, or a directory to receive a content-addressed file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "drawer_train")]
        partition: Partition,
        /// JSON file overriding hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Score the dev split with script evaluation after each epoch.
        #[arg(long)]
        dev_eval: bool,
    },
    /// Script-based evaluation of a drawer.
    EvalScript {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        drawer: String,
        #[arg(long, default_value = "test")]
        split_name: Partition,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Machine-machine evaluation of a teller and drawer pair.
    EvalPair {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        teller: String,
        #[arg(long)]
        drawer: String,
        #[arg(long, default_value = "test")]
        split_name: Partition,
        /// Allow agents trained on the same partition.
        #[arg(long)]
        allow_codebook: bool,
        #[arg(long, default_value_t = eval::DEFAULT_PAIR_MAX_ROUNDS)]
        max_rounds: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Per-round similarity curves of the recorded human canvases.
    Curves {
        #[command(flatten)]
        data: DataArgs,
        /// Restrict to one partition.
        #[arg(long)]
        split_name: Option<Partition>,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
    },
    /// Run the live game service.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "CODRAW_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "CODRAW_STORE", default_value = "transcripts.jsonl")]
        store: PathBuf,
        /// Session time limit in seconds; off by default.
        #[arg(long, env = "CODRAW_TIME_LIMIT")]
        time_limit: Option<f64>,
    },
    /// Replay one dialog and print the similarity after each round.
    Replay {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scene: String,
    },
    /// Write a synthetic release for testing the pipeline.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 800)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        val: usize,
        #[arg(long, default_value_t = 100)]
        test: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, env = "CODRAW_CORPUS")]
    pub corpus: PathBuf,
    /// Split file from `split`; defaults to the release labels.
    #[arg(long, env = "CODRAW_SPLIT")]
    pub split: Option<PathBuf>,
    #[arg(long, env = "CODRAW_CHECKPOINTS")]
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    #[arg(long, default_value = "reports")]
    pub out_dir: PathBuf,
    /// Scene-level worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatsFormat {
    Text,
    Json,
    Csv,
    Markdown,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: i32,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    fn data(message: impl ToString) -> Self {
        CliError { exit: EXIT_DATA, code: "data-error", message: message.to_string() }
    }

    fn usage(message: impl ToString) -> Self {
        CliError { exit: EXIT_USAGE, code: "usage", message: message.to_string() }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e)
    }
}

impl From<eval::CrosstalkViolation> for CliError {
    fn from(e: eval::CrosstalkViolation) -> Self {
        CliError { exit: EXIT_CROSSTALK, code: "crosstalk-violation", message: e.to_string() }
    }
}

impl From<crate::agents::registry::RegistryError> for CliError {
    fn from(e: crate::agents::registry::RegistryError) -> Self {
        use crate::agents::registry::RegistryError as R;
        match e {
            R::BadSpec(_) | R::WrongRole { .. } | R::ScriptNeedsScene => CliError::usage(e),
            _ => CliError::data(e),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    init_logging(&cli.log);
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code, e.message.replace('\n', " "));
            e.exit
        }
    }
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .try_init();
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let corpus = Corpus::load_jsonl(path)?;
    tracing::info!(version = env!("CARGO_PKG_VERSION"), corpus = %path.display(), fingerprint = fingerprint::short(&corpus.fingerprint()), dialogs = corpus.len(), "corpus loaded");
    Ok(corpus)
}

fn load_split(corpus: &Corpus, path: Option<&Path>) -> Result<CorpusSplit, CliError> {
    let split = match path {
        Some(p) => {
            let s = CorpusSplit::load(p)?;
            let unknown = Partition::ALL.iter().flat_map(|&p| s.get(p).iter()).find(|id| corpus.get(id).is_none());
            if let Some(id) = unknown {
                return Err(CliError::data(format!("split {} names dialog {id} which is not in the corpus", p.display())));
            }
            s
        }
        None => split_crosstalk(corpus, true, 0),
    };
    let [a, b, c, d] = split.sizes();
    tracing::info!(source = %split.source, fingerprint = fingerprint::short(&split.fingerprint()), teller_train = a, drawer_train = b, dev = c, test = d, "split");
    Ok(split)
}

fn load_data(d: &DataArgs) -> Result<(Arc<Corpus>, Arc<CorpusSplit>, AgentFactory), CliError> {
    let corpus = Arc::new(load_corpus(&d.corpus)?);
    let split = Arc::new(load_split(&corpus, d.split.as_deref())?);
    let factory = AgentFactory::new(Arc::clone(&corpus), Arc::clone(&split), d.checkpoint_dir.clone());
    Ok((corpus, split, factory))
}

fn read_scene(path: &Path) -> Result<Scene, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect()
}

/// Writes `<stem>.{json,md,csv}` and `<stem>.curves.csv`, named by the report fingerprint.
fn write_report(report: &EvalReport, out_dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)?;
    let stem = format!("{}-{}", slug(&report.condition), fingerprint::short(&report.fingerprint()));
    let base = out_dir.join(&stem);
    fs::write(base.with_extension("json"), serde_json::to_string_pretty(report).expect("report serializes"))?;
    fs::write(base.with_extension("md"), eval::render_markdown(report))?;
    fs::write(base.with_extension("csv"), eval::render_csv(report))?;
    fs::write(out_dir.join(format!("{stem}.curves.csv")), eval::render_curves_csv(&report.curves))?;
    Ok(base.with_extension("md"))
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Ingest { release, out, manifest } => {
            let (corpus, m) = import_official(&release, &ImportOptions::default())?;
            corpus.save_jsonl(&out)?;
            let mpath = manifest.unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", out.display())));
            fs::write(&mpath, serde_json::to_string_pretty(&m).expect("manifest serializes"))?;
            println!(
                "dialogs {} rounds {} replay_match_rate {:.6} anomalies {} fingerprint {}",
                m.dialogs,
                m.rounds,
                m.replay_match_rate,
                m.replay_anomalies.len(),
                m.corpus_fingerprint
            );
        }
        Command::Stats { data, format } => {
            let corpus = load_corpus(&data.corpus)?;
            let split = load_split(&corpus, data.split.as_deref())?;
            let stats = corpus_stats(&corpus);
            match format {
                StatsFormat::Json => println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize")),
                StatsFormat::Csv => print!("{}", stats.to_csv()),
                StatsFormat::Markdown => print!("{}", stats.to_markdown()),
                StatsFormat::Text => {
                    println!("dialogs {}", stats.dialogs);
                    println!("median_teller_tokens {}", stats.teller.median_tokens);
                    println!("median_drawer_tokens {}", stats.drawer.median_tokens);
                    println!("single_token_drawer_messages {}", stats.single_token_drawer_messages);
                    println!("median_rounds {}", stats.median_rounds);
                    let [a, b, c, d] = split.sizes();
                    println!("split {a}/{b}/{c}/{d}");
                }
            }
        }
        Command::Split { corpus, seed, hash, out } => {
            let corpus = load_corpus(&corpus)?;
            let split = split_crosstalk(&corpus, !hash, seed);
            split.save(&out)?;
            let [a, b, c, d] = split.sizes();
            println!("{} {a}/{b}/{c}/{d} {}", split.source, split.fingerprint());
        }
        Command::Similarity { truth, pred, weights, breakdown } => {
            let w = match weights {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<SimilarityWeights>(&text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?
                }
                None => SimilarityWeights::DEFAULT,
            };
            let b = scene_similarity(&read_scene(&truth)?, &read_scene(&pred)?, &w);
            if breakdown {
                println!("{}", serde_json::to_string_pretty(&b).expect("breakdown serializes"));
            } else {
                println!("{:.6}", b.score);
            }
        }
        Command::TrainDrawer { data, seed, out, partition, config, epochs, dev_eval } => {
            let (corpus, split, _) = load_data(&data)?;
            let mut h: Hyper = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?
                }
                None => Hyper::default(),
            };
            h.seed = seed;
            if let Some(e) = epochs {
                h.epochs = e;
            }
            let dev: Vec<_> = corpus.subset(split.get(Partition::Dev)).collect();
            let (drawer, log) = train_drawer(&corpus, &split, partition, &h, dev_eval.then_some(dev.as_slice())).map_err(|e| match e {
                crate::neural::TrainError::Crosstalk(_) => {
                    CliError { exit: EXIT_CROSSTALK, code: "crosstalk-violation", message: e.to_string() }
                }
                e => CliError::data(e),
            })?;
            let path = if out.is_dir() {
                let hyper = serde_json::to_string(&h).expect("hyper serializes");
                let fp = fingerprint::combine([corpus.fingerprint().as_str(), &split.fingerprint(), &hyper]);
                out.join(format!("drawer-{}.json", fingerprint::short(&fp)))
            } else {
                out
            };
            drawer.save(&path).map_err(CliError::data)?;
            fs::write(path.with_extension("log.json"), serde_json::to_string_pretty(&log).expect("log serializes"))?;
            println!("{}", path.display());
        }
        Command::EvalScript { data, drawer, split_name, out } => {
            let (corpus, split, factory) = load_data(&data)?;
            let spec: AgentSpec = drawer.parse()?;
            let d = factory.drawer(&spec)?;
            if let Some(p) = d.manifest().trained_on.partition() {
                if p == split_name {
                    return Err(eval::CrosstalkViolation(p).into());
                }
            }
            let mut report = eval::eval_script_drawer(d.as_ref(), corpus.subset(split.get(split_name)), out.jobs);
            report.split_fingerprint = Some(split.fingerprint());
            let path = write_report(&report, &out.out_dir)?;
            println!("{:.2} {}", report.mean, path.display());
        }
        Command::EvalPair { data, teller, drawer, split_name, allow_codebook, max_rounds, out } => {
            let (corpus, split, factory) = load_data(&data)?;
            let tspec: AgentSpec = teller.parse()?;
            let dspec: AgentSpec = drawer.parse()?;
            let tm = factory.teller_manifest(&tspec)?;
            let d = factory.drawer(&dspec)?;
            eval::enforce_crosstalk(&tm, d.manifest()).or_else(|e| if allow_codebook { Ok(()) } else { Err(e) })?;
            let scenes: Vec<(String, Scene)> =
                corpus.subset(split.get(split_name)).map(|t| (t.scene_id.clone(), t.target.clone())).collect();
            let make = |id: &str| -> Arc<dyn TellerAgent> { factory.teller(&tspec, Some(id)).expect("teller checked above") };
            if matches!(tspec, AgentSpec::Script(None)) {
                // Every scene needs its own script.
                for (id, _) in &scenes {
                    factory.teller(&tspec, Some(id))?;
                }
            }
            let config = PairConfig { max_rounds, allow_codebook };
            let mut report = eval::eval_pair(&make, &tm, d.as_ref(), &scenes, &config, out.jobs)?;
            report.split_fingerprint = Some(split.fingerprint());
            let path = write_report(&report, &out.out_dir)?;
            println!("{:.2} {}", report.mean, path.display());
        }
        Command::Curves { data, split_name, out_dir } => {
            let corpus = load_corpus(&data.corpus)?;
            let curves = match split_name {
                Some(p) => {
                    let split = load_split(&corpus, data.split.as_deref())?;
                    eval::corpus_curves(corpus.subset(split.get(p)))
                }
                None => eval::corpus_curves(corpus.transcripts()),
            };
            fs::create_dir_all(&out_dir)?;
            let name = format!("human-curves-{}.csv", fingerprint::short(&corpus.fingerprint()));
            let path = out_dir.join(name);
            fs::write(&path, eval::render_curves_csv(&curves))?;
            println!("round0 {:.6} round5 {:.6} round35 {:.6} {}", curves.round0, curves.padded[4], curves.padded[34], path.display());
        }
        Command::Serve { data, addr, store, time_limit } => {
            let (_, _, factory) = load_data(&data)?;
            let config = GameConfig { time_limit_secs: time_limit, ..GameConfig::default() };
            let state = AppState::new(Arc::new(factory), TranscriptStore::new(store), config);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(addr, state))?;
        }
        Command::Replay { corpus, scene } => {
            let corpus = load_corpus(&corpus)?;
            let t = corpus.get(&scene).ok_or_else(|| CliError::data(format!("no dialog {scene}")))?;
            let r = replay(t).map_err(CliError::data)?;
            for (k, s) in similarity_by_round(t).iter().enumerate() {
                println!("{k} {s:.6}");
            }
            for m in &r.mismatches {
                println!("mismatch round {} {}", m.round, m.reason);
            }
        }
        Command::Synth { out, seed, train, val, test } => {
            fs::create_dir_all(&out)?;
            let path = write_release(&out, &SynthConfig { train, val, test, seed, ..SynthConfig::default() })?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
