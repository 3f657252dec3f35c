//! Complex logical query answering over knowledge graphs, recast as
//! instruction-tuning data.
//!
//! The pipeline: load a triple store ([`kg`]), sample and normalize EFO₁
//! queries ([`query`]), compile them into subquery chains ([`tree`]),
//! evaluate them symbolically ([`exec`]), retrieve a textual neighborhood
//! ([`context`]), assemble prompts and curriculum stages ([`corpus`]) and
//! score model predictions ([`eval`]).

pub mod context;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod exec;
pub mod kg;
pub mod pipeline;
pub mod query;
pub mod render;
pub mod synth;
pub mod tree;

pub use context::{completeness, estimate_tokens, retrieve, RetrievedContext, TokenBudget};
pub use corpus::{
    build_corpus, schedule_stages, CorpusConfig, CorpusRecord, CorpusSample, CorpusStats, CurriculumSchedule, Mix,
    Split,
};
pub use error::{Error, Result};
pub use eval::{accuracy, aggregate, mrr_filtered, parse_prediction, EvalReport, LabelIndex, Prediction};
pub use exec::{answer, answer_chain, oracle_answer, split_answers, AnswerSplit, ChainEvaluation, EntitySet};
pub use kg::{EntityId, KnowledgeGraph, RelationId, SplitGraphs, Triple};
pub use query::{classify, parse, GroundedQuery, QueryExpr, QueryType};
pub use tree::{compile, difficulty, DecompositionChain, DifficultyClass, StepKind, SubqueryStep};
