use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Corpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub messages: usize,
    pub median_tokens: f64,
    pub histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogs: usize,
    pub total_messages: usize,
    pub teller: LengthStats,
    pub drawer: LengthStats,
    pub teller_vocabulary: usize,
    pub single_token_drawer_messages: usize,
    pub single_token_drawer_pct: f64,
    pub median_rounds: f64,
    pub round_histogram: BTreeMap<usize, usize>,
    pub median_duration_secs: Option<f64>,
    pub dialogs_with_peek: usize,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[mid] } else { (values[mid - 1] + values[mid]) / 2.0 })
}

fn length_stats(lengths: Vec<usize>) -> LengthStats {
    let mut histogram = BTreeMap::new();
    for &l in &lengths {
        *histogram.entry(l).or_insert(0) += 1;
    }
    let mut as_f: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    LengthStats { messages: lengths.len(), median_tokens: median(&mut as_f).unwrap_or(0.0), histogram }
}

/// Message-length, round-count and duration statistics. Empty messages are
/// not counted as messages.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut teller_lengths = Vec::new();
    let mut drawer_lengths = Vec::new();
    let mut vocab = BTreeSet::new();
    let mut rounds = Vec::new();
    let mut durations = Vec::new();
    let mut round_histogram = BTreeMap::new();
    let mut dialogs_with_peek = 0;
    for t in corpus.transcripts() {
        for r in &t.rounds {
            if !r.teller.is_empty() {
                teller_lengths.push(r.teller.tokens.len());
                vocab.extend(r.teller.tokens.iter().map(String::as_str));
            }
            if !r.drawer.is_empty() {
                drawer_lengths.push(r.drawer.tokens.len());
            }
        }
        rounds.push(t.rounds.len() as f64);
        *round_histogram.entry(t.rounds.len()).or_insert(0) += 1;
        durations.extend(t.duration);
        if t.rounds.iter().any(|r| r.peek) {
            dialogs_with_peek += 1;
        }
    }
    let single = drawer_lengths.iter().filter(|&&l| l == 1).count();
    let drawer_total = drawer_lengths.len();
    let teller = length_stats(teller_lengths);
    let drawer = length_stats(drawer_lengths);
    CorpusStats {
        dialogs: corpus.len(),
        total_messages: teller.messages + drawer.messages,
        teller_vocabulary: vocab.len(),
        single_token_drawer_messages: single,
        single_token_drawer_pct: if drawer_total == 0 { 0.0 } else { 100.0 * single as f64 / drawer_total as f64 },
        median_rounds: median(&mut rounds).unwrap_or(0.0),
        round_histogram,
        median_duration_secs: median(&mut durations),
        dialogs_with_peek,
        teller,
        drawer,
    }
}

impl CorpusStats {
    fn summary_rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dialogs", self.dialogs.to_string()),
            ("total_messages", self.total_messages.to_string()),
            ("teller_messages", self.teller.messages.to_string()),
            ("drawer_messages", self.drawer.messages.to_string()),
            ("median_teller_tokens", self.teller.median_tokens.to_string()),
            ("median_drawer_tokens", self.drawer.median_tokens.to_string()),
            ("teller_vocabulary", self.teller_vocabulary.to_string()),
            ("single_token_drawer_messages", self.single_token_drawer_messages.to_string()),
            ("single_token_drawer_pct", format!("{:.2}", self.single_token_drawer_pct)),
            ("median_rounds", self.median_rounds.to_string()),
            ("median_duration_secs", self.median_duration_secs.map(|d| d.to_string()).unwrap_or_else(|| "n/a".into())),
            ("dialogs_with_peek", self.dialogs_with_peek.to_string()),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        for (k, v) in self.summary_rows() {
            writeln!(out, "summary,{k},{v}").unwrap();
        }
        for (section, hist) in
            [("teller_tokens", &self.teller.histogram), ("drawer_tokens", &self.drawer.histogram), ("rounds", &self.round_histogram)]
        {
            for (k, v) in hist {
                writeln!(out, "{section},{k},{v}").unwrap();
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| statistic | value |\n|---|---|\n");
        for (k, v) in self.summary_rows() {
            writeln!(out, "| {k} | {v} |").unwrap();
        }
        out
    }
}
