//! Pull-request description toolkit: corpus handling, text cleaning,
//! an extractive LexRank baseline, ROUGE scoring, and clients for an
//! abstractive generation backend and the GitHub REST API.

pub mod backend;
pub mod corpus;
pub mod eval;
pub mod github;
pub mod lexrank;
pub mod preprocess;
pub mod rouge;
pub mod text;

pub use corpus::{CorpusFormat, CorpusSplit, DatasetStats, PullRequestRecord};
pub use preprocess::{CleaningConfig, SequenceBudget};
pub use eval::{ComparisonTable, EvalReport, PredictionRecord};
pub use lexrank::{LexRankConfig, SentenceGraph};
pub use rouge::{RougeConfig, RougeScore, RougeVariant};
pub use text::{TokenKind, TokenSequence};
