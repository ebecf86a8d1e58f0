//! Connective mining: POS-pattern extraction of turn-initial connectives,
//! LLM-prompted annotation, dataset statistics and train/validation/test split.

mod annotate;
mod extract;
mod pos;
mod prompt;
mod stats;

use thiserror::Error;

pub use annotate::{annotate, mine, MineOptions, MineReport};
pub use extract::{
    extract_connective, extract_from_text, read_tagged, split_by_punctuation, Extraction,
    StopReason, TaggedTurn, DEFAULT_MAX_TOKENS,
};
pub use pos::{classify_prefix, lexicon_tag, Lexicons, PosTag, PrefixClass, TaggedToken};
pub use prompt::{build_llm_prompt, parse_llm_output, LlmAnnotation, CATEGORY_SPACE};
pub use stats::{
    dataset_stats, normalized_entropy, read_records, render_stats_row, split_dataset,
    write_records, Category, ConnectiveRecord, DatasetStats, RecordSource, Splits,
};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unparseable model output: {0}")]
    Output(String),
    #[error(transparent)]
    Remote(#[from] crate::components::RemoteError),
}
