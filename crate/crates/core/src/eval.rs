//! Prediction parsing, filtered MRR, accuracy and per-type aggregation.
//!
//! Generated answers are sets, not rankings. The rank of an entity is its
//! position in the parsed `FINAL` list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusRecord, DiscardedSample};
use crate::error::{Error, Result};
use crate::exec::{AnswerSplit, EntitySet};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::query::{parse, QueryExpr, QueryType};
use crate::render::QUERY_PREFIX;

/// Label → id lookup with a case-insensitive fallback.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    exact: HashMap<String, EntityId>,
    folded: HashMap<String, EntityId>,
    /// Largest number of `", "`-separated pieces in any label.
    max_pieces: usize,
}

impl LabelIndex {
    /// When labels collide the smallest id wins.
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let mut index = LabelIndex {
            max_pieces: 1,
            ..Default::default()
        };
        for (&id, label) in graph.entities() {
            index.exact.entry(label.clone()).or_insert(id);
            index.folded.entry(label.to_lowercase()).or_insert(id);
            index.max_pieces = index.max_pieces.max(label.matches(", ").count() + 1);
        }
        index
    }

    pub fn lookup(&self, label: &str) -> Option<EntityId> {
        self.exact
            .get(label)
            .or_else(|| self.folded.get(&label.to_lowercase()))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub raw_text: String,
    /// Rank order, first occurrence kept.
    pub parsed: Vec<EntityId>,
    pub parse_ok: bool,
    /// Labels in the `FINAL` block that matched no entity.
    pub unmatched: usize,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub output_text: String,
}

fn final_block() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"FINAL:[ \t]*\{([^}\n]*)\}").expect("valid pattern"))
}

/// Reads the last `FINAL: {…}` block. Labels are matched greedily, longest
/// first, so labels that themselves contain `", "` still resolve.
pub fn parse_prediction(id: &str, raw_text: &str, labels: &LabelIndex) -> Prediction {
    let Some(caps) = final_block().captures_iter(raw_text).last() else {
        return Prediction {
            id: id.to_string(),
            raw_text: raw_text.to_string(),
            parsed: Vec::new(),
            parse_ok: false,
            unmatched: 0,
        };
    };
    let inner = caps.get(1).map_or("", |m| m.as_str()).trim();
    let pieces: Vec<&str> = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(", ").collect()
    };
    let mut parsed = Vec::new();
    let mut seen = BTreeSet::new();
    let mut unmatched = 0;
    let mut i = 0;
    while i < pieces.len() {
        let longest = (i + labels.max_pieces).min(pieces.len());
        let hit = (i + 1..=longest)
            .rev()
            .find_map(|j| labels.lookup(pieces[i..j].join(", ").trim()).map(|e| (e, j)));
        match hit {
            Some((e, j)) => {
                if seen.insert(e) {
                    parsed.push(e);
                }
                i = j;
            }
            None => {
                unmatched += 1;
                i += 1;
            }
        }
    }
    Prediction {
        id: id.to_string(),
        raw_text: raw_text.to_string(),
        parsed,
        parse_ok: true,
        unmatched,
    }
}

/// The s-expression on the last `QUERY:` line of a rendered prompt.
pub fn extract_query(prompt: &str) -> Result<QueryExpr> {
    let line = prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(QUERY_PREFIX))
        .ok_or_else(|| Error::Structure("prompt has no QUERY line".into()))?;
    parse(line.trim())
}

fn require_hard(answers: &AnswerSplit) -> Result<()> {
    if answers.hard.is_empty() {
        Err(Error::EmptyHardSet)
    } else {
        Ok(())
    }
}

/// Mean reciprocal rank over hard answers, skipping other correct answers
/// when counting the entities ranked ahead.
pub fn mrr_filtered(parsed: &[EntityId], answers: &AnswerSplit) -> Result<f64> {
    require_hard(answers)?;
    let correct = answers.all();
    let mut total = 0.0;
    for a in answers.hard.iter() {
        if let Some(pos) = parsed.iter().position(|&e| e == a) {
            let ahead = parsed[..pos].iter().filter(|&&e| !correct.contains(e)).count();
            total += 1.0 / (ahead + 1) as f64;
        }
    }
    Ok(total / answers.hard.len() as f64)
}

/// Plain list-position MRR over hard answers.
pub fn mrr_unfiltered(parsed: &[EntityId], answers: &AnswerSplit) -> Result<f64> {
    require_hard(answers)?;
    let mut total = 0.0;
    for a in answers.hard.iter() {
        if let Some(pos) = parsed.iter().position(|&e| e == a) {
            total += 1.0 / (pos + 1) as f64;
        }
    }
    Ok(total / answers.hard.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyMode {
    /// Share of hard answers present.
    #[default]
    Recall,
    /// 1 when every hard answer is present and nothing outside easy∪hard
    /// is, else 0.
    ExactSet,
}

pub fn accuracy(parsed: &[EntityId], answers: &AnswerSplit, mode: AccuracyMode) -> Result<f64> {
    require_hard(answers)?;
    let got: EntitySet = parsed.iter().copied().collect();
    let found = answers.hard.intersection(&got).len();
    Ok(match mode {
        AccuracyMode::Recall => found as f64 / answers.hard.len() as f64,
        AccuracyMode::ExactSet => {
            let exact = found == answers.hard.len() && got.is_subset(&answers.all());
            if exact {
                1.0
            } else {
                0.0
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreStatus {
    Scored,
    ParseFailure,
    Missing,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    #[serde(rename = "type")]
    pub query_type: QueryType,
    pub mrr: f64,
    pub accuracy: f64,
    pub status: ScoreStatus,
}

impl SampleScore {
    pub fn zero(id: impl Into<String>, query_type: QueryType, status: ScoreStatus) -> Self {
        SampleScore {
            id: id.into(),
            query_type,
            mrr: 0.0,
            accuracy: 0.0,
            status,
        }
    }
}

/// Scores one prediction; a parse failure scores 0 on both metrics.
pub fn score(
    record: &CorpusRecord,
    prediction: &Prediction,
    mode: AccuracyMode,
) -> Result<SampleScore> {
    let answers = record.answers();
    if !prediction.parse_ok {
        require_hard(&answers)?;
        return Ok(SampleScore::zero(&record.id, record.query_type, ScoreStatus::ParseFailure));
    }
    Ok(SampleScore {
        id: record.id.clone(),
        query_type: record.query_type,
        mrr: mrr_filtered(&prediction.parsed, &answers)?,
        accuracy: accuracy(&prediction.parsed, &answers, mode)?,
        status: ScoreStatus::Scored,
    })
}

/// Means of a group of per-type columns; `None` when no member is present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub avg_p: Option<f64>,
    pub avg_ood: Option<f64>,
    pub avg_n: Option<f64>,
}

impl Aggregates {
    pub fn from_per_type(per_type: &BTreeMap<QueryType, f64>) -> Self {
        let mean = |group: &[QueryType]| {
            let vals: Vec<f64> = group.iter().filter_map(|t| per_type.get(t).copied()).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Aggregates {
            avg_p: mean(&QueryType::POSITIVE),
            avg_ood: mean(&QueryType::OOD),
            avg_n: mean(&QueryType::NEGATION),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    /// Percent.
    pub mrr: f64,
    /// Percent.
    pub accuracy: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub samples: usize,
    pub scored: usize,
    pub parse_failures: usize,
    pub missing: usize,
    pub discarded: usize,
    /// Samples dropped from scoring because they had no hard answers.
    pub without_hard_answers: usize,
    /// Prediction ids absent from the corpus.
    pub unknown_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: BTreeMap<QueryType, TypeScore>,
    pub mrr: Aggregates,
    pub accuracy: Aggregates,
    pub counts: EvalCounts,
}

/// Per-type means (in percent) and group averages over them.
pub fn aggregate(scores: &[SampleScore]) -> EvalReport {
    let mut sums: BTreeMap<QueryType, (f64, f64, usize)> = BTreeMap::new();
    let mut counts = EvalCounts::default();
    for s in scores {
        let e = sums.entry(s.query_type).or_default();
        e.0 += s.mrr;
        e.1 += s.accuracy;
        e.2 += 1;
        counts.samples += 1;
        match s.status {
            ScoreStatus::Scored => counts.scored += 1,
            ScoreStatus::ParseFailure => counts.parse_failures += 1,
            ScoreStatus::Missing => counts.missing += 1,
            ScoreStatus::Discarded => counts.discarded += 1,
        }
    }
    let per_type: BTreeMap<QueryType, TypeScore> = sums
        .into_iter()
        .map(|(t, (m, a, n))| {
            let n_f = n as f64;
            (
                t,
                TypeScore {
                    mrr: 100.0 * m / n_f,
                    accuracy: 100.0 * a / n_f,
                    samples: n,
                },
            )
        })
        .collect();
    let column = |f: fn(&TypeScore) -> f64| -> BTreeMap<QueryType, f64> {
        per_type.iter().map(|(t, s)| (*t, f(s))).collect()
    };
    EvalReport {
        mrr: Aggregates::from_per_type(&column(|s| s.mrr)),
        accuracy: Aggregates::from_per_type(&column(|s| s.accuracy)),
        per_type,
        counts,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub accuracy: AccuracyMode,
}

/// Scores predictions against corpus records. Records without a
/// prediction, and discarded samples, score 0.
pub fn evaluate(
    records: &[CorpusRecord],
    predictions: &[PredictionLine],
    discarded: &[DiscardedSample],
    labels: &LabelIndex,
    options: EvalOptions,
) -> (EvalReport, Vec<SampleScore>) {
    let by_id: HashMap<&str, &PredictionLine> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let known: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let scored: Vec<Option<SampleScore>> = records
        .par_iter()
        .map(|r| match by_id.get(r.id.as_str()) {
            None => (!r.hard_answers.is_empty())
                .then(|| SampleScore::zero(&r.id, r.query_type, ScoreStatus::Missing)),
            Some(p) => score(r, &parse_prediction(&p.id, &p.output_text, labels), options.accuracy).ok(),
        })
        .collect();
    let without_hard = scored.iter().filter(|s| s.is_none()).count();
    let mut scores: Vec<SampleScore> = scored.into_iter().flatten().collect();
    scores.extend(
        discarded
            .iter()
            .filter(|d| !known.contains(d.id.as_str()))
            .map(|d| SampleScore::zero(&d.id, d.query_type, ScoreStatus::Discarded)),
    );
    let mut report = aggregate(&scores);
    report.counts.without_hard_answers = without_hard;
    report.counts.unknown_ids = predictions
        .iter()
        .filter(|p| !known.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    (report, scores)
}

/// One decimal, half-up.
pub fn round_half_up(x: f64) -> f64 {
    (x * 10.0 + 0.5 + 1e-9).floor() / 10.0
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}", round_half_up(v)))
}

const COLUMNS: [&str; 17] = [
    "avg_p", "avg_ood", "avg_n", "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up", "2in", "3in", "inp", "pin",
    "pni",
];

impl EvalReport {
    fn row(&self, metric: fn(&TypeScore) -> f64, agg: &Aggregates) -> Vec<String> {
        let mut cells = vec![cell(agg.avg_p), cell(agg.avg_ood), cell(agg.avg_n)];
        for t in QueryType::ALL {
            cells.push(cell(self.per_type.get(&t).map(metric)));
        }
        cells
    }

    /// Fixed-width table: aggregates first, then the fourteen types.
    pub fn table(&self) -> String {
        let mut out = format!("{:<8}", "metric");
        for c in COLUMNS {
            let _ = write!(out, "{c:>8}");
        }
        out.push('\n');
        for (name, cells) in [
            ("MRR", self.row(|s| s.mrr, &self.mrr)),
            ("Acc", self.row(|s| s.accuracy, &self.accuracy)),
        ] {
            let _ = write!(out, "{name:<8}");
            for c in cells {
                let _ = write!(out, "{c:>8}");
            }
            out.push('\n');
        }
        out
    }
}
