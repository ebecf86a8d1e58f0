//! Entropy, confidence, perplexity, training losses and curriculum planning.
//!
//! Every function here is pure. Models are reached only through
//! [`ProbabilityOracle`], so the same code runs over toy tables and anything
//! else that can produce next-token distributions.

mod curriculum;
mod dist;
mod entropy;
mod loss;
mod oracle;
mod sample;

use thiserror::Error;

pub use curriculum::{
    curriculum_plan, CurriculumOrder, CurriculumPlan, CurriculumStage, DEFAULT_EPOCHS,
};
pub use dist::{TokenDistribution, Vocabulary, MASS_TOLERANCE};
pub use entropy::{
    confidence, confidence_from_entropies, distribution_with_entropy, entropy, entropy_checked,
    mean_connective_entropy,
};
pub use loss::{
    coherence_loss, coherence_loss_from_ppl, connective_prior, pair_perplexity, perplexity,
    prior_regularization_loss, sequence_nll, style_consistency_loss, total_loss, LossWeights,
    PairScoring,
};
pub use oracle::{
    context_key, ConstantOracle, ModelRole, ProbabilityOracle, TabularOracle, CONTEXT_SEPARATOR,
};
pub use sample::{
    chunks_for, read_samples, tokenize, truncate_sample, write_samples, DialogueSample, CHUNK_MS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("vocabulary must contain at least one token")]
    EmptyVocabulary,
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("distribution has no entries")]
    EmptyDistribution,
    #[error("expected {expected} probabilities, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("probabilities sum to {0}, not 1")]
    MassNotOne(f64),
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("token {0:?} has zero probability")]
    ZeroProbability(String),
    #[error("no table row for context {0:?} or any of its suffixes")]
    NoContext(String),
    #[error("row for context {context:?}: {reason}")]
    BadRow { context: String, reason: String },
    #[error("candidate has no non-marker tokens")]
    EmptyCandidate,
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("maximum entropy must be positive, got {0}")]
    InvalidHMax(f64),
    #[error("target sequence is empty")]
    EmptyTarget,
    #[error("p has mass at index {0} where q is zero")]
    SupportViolation(usize),
    #[error("loss weight {0} must be finite and non-negative")]
    InvalidWeight(f64),
    #[error("non-finite loss component {0}")]
    NonFinite(f64),
    #[error("{samples} samples cannot fill {stages} stages")]
    TooFewSamples { samples: usize, stages: usize },
    #[error("sample {0:?} has no chunk count")]
    MissingChunkCount(String),
    #[error("{available} chunks requested but sample has {total}")]
    ChunksOutOfRange { available: u32, total: u32 },
    #[error("sample {id:?}: {reason}")]
    InvalidSample { id: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
