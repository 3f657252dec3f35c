//! Instruction-tuning samples and curriculum stages.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::context::{estimate_tokens, retrieve_with, RetrievalOptions, RetrievedContext, TokenBudget};
use crate::error::{Error, Result};
use crate::exec::{answer_chain, partition, AnswerSplit, EntitySet};
use crate::kg::{EntityId, KnowledgeGraph, SplitGraphs};
use crate::query::{GroundedQuery, QueryType};
use crate::render::{render_completion, render_prompt, DEFAULT_STEP_DISPLAY_CAP, INSTRUCTION_VERSION};
use crate::tree::{compile, DifficultyClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    /// Graph used for retrieval and the (smaller, larger) pair for answers.
    pub fn graphs(self, splits: &SplitGraphs) -> (&KnowledgeGraph, &KnowledgeGraph, &KnowledgeGraph) {
        match self {
            Split::Train => (&splits.train, &splits.train, &splits.train),
            Split::Valid => (&splits.train, &splits.train, &splits.train_valid),
            Split::Test => (
                &splits.train_valid,
                &splits.train_valid,
                &splits.train_valid_test,
            ),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusConfig {
    pub budget: TokenBudget,
    pub retrieval: RetrievalOptions,
    pub step_display_cap: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            budget: TokenBudget::default(),
            retrieval: RetrievalOptions::default(),
            step_display_cap: DEFAULT_STEP_DISPLAY_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSample {
    pub query: GroundedQuery,
    pub split: Split,
    pub context: RetrievedContext,
    pub prompt: String,
    pub completion: String,
    pub subquery_count: usize,
    pub difficulty: DifficultyClass,
    pub answers: AnswerSplit,
    /// Estimate for prompt and completion together.
    pub token_estimate: usize,
}

impl CorpusSample {
    pub fn id(&self) -> &str {
        &self.query.id
    }

    pub fn to_record(&self) -> CorpusRecord {
        CorpusRecord {
            id: self.query.id.clone(),
            query_type: self.query.query_type,
            difficulty: self.difficulty.level(),
            split: self.split,
            prompt: self.prompt.clone(),
            completion: self.completion.clone(),
            easy_answers: self.answers.easy.as_slice().to_vec(),
            hard_answers: self.answers.hard.as_slice().to_vec(),
            token_estimate: self.token_estimate,
        }
    }
}

/// One JSONL line of a corpus or stage file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub query_type: QueryType,
    pub difficulty: u8,
    pub split: Split,
    pub prompt: String,
    pub completion: String,
    pub easy_answers: Vec<EntityId>,
    pub hard_answers: Vec<EntityId>,
    pub token_estimate: usize,
}

impl CorpusRecord {
    pub fn answers(&self) -> AnswerSplit {
        AnswerSplit {
            easy: self.easy_answers.iter().copied().collect(),
            hard: self.hard_answers.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub input: usize,
    pub emitted: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardedSample {
    pub id: String,
    #[serde(rename = "type")]
    pub query_type: QueryType,
    pub split: Split,
    pub token_estimate: usize,
}

pub const HISTOGRAM_BUCKET: usize = 256;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub budget: usize,
    pub instruction_version: String,
    pub total: Counts,
    pub per_type: BTreeMap<QueryType, Counts>,
    pub per_split: BTreeMap<Split, Counts>,
    /// Emitted samples per token-estimate bucket, keyed by bucket start.
    pub token_histogram: BTreeMap<usize, usize>,
    pub discarded: Vec<DiscardedSample>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<CorpusSample>,
    pub stats: CorpusStats,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusSample> + '_ {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

enum Built {
    Kept(Box<CorpusSample>),
    Dropped(DiscardedSample),
}

/// Builds one sample per query. Samples whose prompt plus completion exceed
/// the budget are dropped and recorded in the statistics.
pub fn build_corpus(
    splits: &SplitGraphs,
    queries: &[(Split, GroundedQuery)],
    config: &CorpusConfig,
) -> Result<Corpus> {
    let built: Vec<Built> = queries
        .par_iter()
        .map(|(split, q)| build_sample(splits, *split, q, config))
        .collect::<Result<_>>()?;

    let mut stats = CorpusStats {
        budget: config.budget.max_tokens(),
        instruction_version: INSTRUCTION_VERSION.to_string(),
        ..CorpusStats::default()
    };
    let mut samples = Vec::new();
    for ((split, q), b) in queries.iter().zip(built) {
        let kept = matches!(b, Built::Kept(_));
        for c in [
            &mut stats.total,
            stats.per_type.entry(q.query_type).or_default(),
            stats.per_split.entry(*split).or_default(),
        ] {
            c.input += 1;
            if kept {
                c.emitted += 1;
            } else {
                c.discarded += 1;
            }
        }
        match b {
            Built::Kept(s) => {
                let bucket = s.token_estimate / HISTOGRAM_BUCKET * HISTOGRAM_BUCKET;
                *stats.token_histogram.entry(bucket).or_default() += 1;
                samples.push(*s);
            }
            Built::Dropped(d) => stats.discarded.push(d),
        }
    }
    Ok(Corpus { samples, stats })
}

fn build_sample(splits: &SplitGraphs, split: Split, q: &GroundedQuery, config: &CorpusConfig) -> Result<Built> {
    let (retrieval, smaller, larger) = split.graphs(splits);
    let context = retrieve_with(q, retrieval, config.budget, config.retrieval)?;
    let prompt = render_prompt(&q.expr, &context.triples, retrieval);
    let chain = compile(&q.expr)?;
    let eval = answer_chain(&chain, larger)?;
    let completion = render_completion(&chain, &eval, larger, config.step_display_cap);
    let token_estimate = estimate_tokens(&format!("{prompt}\n{completion}"));
    if context.truncated || !config.budget.allows(token_estimate) {
        return Ok(Built::Dropped(DiscardedSample {
            id: q.id.clone(),
            query_type: q.query_type,
            split,
            token_estimate,
        }));
    }
    let answers = match split {
        Split::Train => AnswerSplit {
            easy: eval.final_answers.clone(),
            hard: EntitySet::new(),
        },
        _ => partition(&eval.final_answers, &answer_chain(&chain, smaller)?.final_answers),
    };
    Ok(Built::Kept(Box::new(CorpusSample {
        query: q.clone(),
        split,
        context,
        prompt,
        completion,
        subquery_count: chain.subquery_count,
        difficulty: DifficultyClass::from_count(chain.subquery_count),
        answers,
        token_estimate,
    })))
}

/// Percentages of easy, medium and hard samples in one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mix(pub [u32; 3]);

impl Mix {
    pub fn validate(self) -> Result<()> {
        if self.0.iter().sum::<u32>() != 100 {
            return Err(Error::Config(format!("mix {self} does not sum to 100")));
        }
        Ok(())
    }

    /// Per-class counts for `n` samples by largest remainder; ties go to the
    /// easier class.
    pub fn counts(self, n: usize) -> [usize; 3] {
        let exact = self.0.map(|p| n * p as usize);
        let mut out = exact.map(|x| x / 100);
        let mut rest = n - out.iter().sum::<usize>();
        let mut order = [0, 1, 2];
        order.sort_by_key(|&i| std::cmp::Reverse(exact[i] % 100));
        for i in order {
            if rest == 0 {
                break;
            }
            out[i] += 1;
            rest -= 1;
        }
        out
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Mix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad mix `{s}`")))?;
        let [a, b, c] = parts[..] else {
            return Err(Error::Config(format!("mix `{s}` needs three percentages")));
        };
        let mix = Mix([a, b, c]);
        mix.validate()?;
        Ok(mix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub mix: Mix,
    /// Samples in the stage; `None` picks the largest size all stages can
    /// share.
    pub size: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub stages: Vec<StageSpec>,
    /// A sample is used by at most one stage.
    pub disjoint: bool,
}

impl CurriculumSchedule {
    pub const DEFAULT_MIXES: [Mix; 3] = [Mix([80, 10, 10]), Mix([10, 80, 10]), Mix([10, 10, 80])];

    pub fn with_seed(seed: u64) -> Self {
        CurriculumSchedule {
            stages: Self::DEFAULT_MIXES
                .iter()
                .enumerate()
                .map(|(i, &mix)| StageSpec {
                    mix,
                    size: None,
                    seed: seed.wrapping_add(i as u64 + 1),
                })
                .collect(),
            disjoint: true,
        }
    }

    /// Parses `s1=80,10,10;s2=10,80,10;s3=10,10,80`, replacing the mixes of
    /// the named stages.
    pub fn set_mixes(&mut self, spec: &str) -> Result<()> {
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, mix) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected `sN=a,b,c`, got `{part}`")))?;
            let k: usize = name
                .trim()
                .strip_prefix('s')
                .and_then(|n| n.parse().ok())
                .filter(|k| (1..=self.stages.len()).contains(k))
                .ok_or_else(|| Error::Config(format!("unknown stage `{name}`")))?;
            self.stages[k - 1].mix = mix.parse()?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("schedule has no stages".into()));
        }
        for s in &self.stages {
            s.mix.validate()?;
            if s.size == Some(0) {
                return Err(Error::Config("stage size must be positive".into()));
            }
        }
        Ok(())
    }

    fn demand(&self, auto: usize) -> Vec<[usize; 3]> {
        self.stages
            .iter()
            .map(|s| s.mix.counts(s.size.unwrap_or(auto)))
            .collect()
    }

    fn feasible(&self, auto: usize, pools: [usize; 3]) -> bool {
        let demand = self.demand(auto);
        (0..3).all(|c| {
            if self.disjoint {
                demand.iter().map(|d| d[c]).sum::<usize>() <= pools[c]
            } else {
                demand.iter().all(|d| d[c] <= pools[c])
            }
        })
    }

    /// Concrete stage sizes for the given class pool sizes.
    pub fn resolve_sizes(&self, pools: [usize; 3]) -> Vec<usize> {
        let total: usize = pools.iter().sum();
        let auto = (0..=total)
            .rev()
            .find(|&n| self.feasible(n, pools))
            .unwrap_or(0);
        self.stages.iter().map(|s| s.size.unwrap_or(auto)).collect()
    }
}

/// Items that can be assigned to curriculum stages.
pub trait Staged {
    fn stage_id(&self) -> &str;
    fn difficulty_class(&self) -> DifficultyClass;
}

impl Staged for CorpusSample {
    fn stage_id(&self) -> &str {
        &self.query.id
    }

    fn difficulty_class(&self) -> DifficultyClass {
        self.difficulty
    }
}

impl Staged for CorpusRecord {
    fn stage_id(&self) -> &str {
        &self.id
    }

    fn difficulty_class(&self) -> DifficultyClass {
        DifficultyClass::from_level(self.difficulty).unwrap_or(DifficultyClass::Hard)
    }
}

/// Draws each stage from per-class pools without replacement, using the
/// stage seed. Each returned stage is sorted by id.
pub fn schedule_stages<'a, T: Staged>(items: &'a [T], schedule: &CurriculumSchedule) -> Result<Vec<Vec<&'a T>>> {
    schedule.validate()?;
    let mut pools: [Vec<&T>; 3] = Default::default();
    for item in items {
        pools[item.difficulty_class().index()].push(item);
    }
    for pool in &mut pools {
        pool.sort_by(|a, b| a.stage_id().cmp(b.stage_id()));
    }
    let sizes = schedule.resolve_sizes(pools.each_ref().map(Vec::len));
    let mut stages = Vec::with_capacity(schedule.stages.len());
    for (spec, &size) in schedule.stages.iter().zip(&sizes) {
        let counts = spec.mix.counts(size);
        let mut stage = Vec::with_capacity(size);
        for class in DifficultyClass::ALL {
            let c = class.index();
            let pool = &mut pools[c];
            if counts[c] > pool.len() {
                return Err(Error::PoolExhausted {
                    class,
                    requested: counts[c],
                    available: pool.len(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ ((c as u64) << 32));
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut rng);
            let mut chosen: Vec<usize> = order[..counts[c]].to_vec();
            stage.extend(chosen.iter().map(|&i| pool[i]));
            if schedule.disjoint {
                chosen.sort_unstable_by(|a, b| b.cmp(a));
                for i in chosen {
                    pool.remove(i);
                }
            }
        }
        stage.sort_by(|a, b| a.stage_id().cmp(b.stage_id()));
        stages.push(stage);
    }
    Ok(stages)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: impl IntoIterator<Item = T>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
