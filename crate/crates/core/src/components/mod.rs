//! Component interfaces for the streaming pipeline and their reference
//! implementations.
//!
//! Everything here except [`RemoteLargeModel`] is a deterministic function of
//! its configuration, so simulated sessions replay bit-for-bit.

mod asr;
mod large;
mod playback;
mod remote;
mod scenario;
mod small;
mod tts;

use std::sync::mpsc::Receiver;
use std::time::Instant;

use thiserror::Error;

pub use asr::{scripted_asr_stream, AsrSource, ScriptedAsr, TimedHypothesis};
pub use large::{scripted_large_model, ResponseToken, ScriptedLargeModel, FALLBACK_RESPONSE};
pub use playback::{concat_streams, layout_stream, AudioChunk, StreamId};
pub use remote::{RemoteError, RemoteLargeModel};
pub use scenario::{
    read_scenarios, write_scenarios, Reference, Scenario, ScenarioChunk, SmallScript,
    TimingOverrides,
};
pub use small::{normalize_text, ScriptedSmallModel, SmallModel, TabularSmallModel, END_TOKEN};
pub use tts::{SimulatedTts, SynthChunk, TtsEngine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComponentError {
    #[error("scenario {id:?}: {reason}")]
    Scenario { id: String, reason: String },
    #[error("invalid component config: {0}")]
    Config(String),
    #[error("remote model: {0}")]
    Remote(#[from] RemoteError),
    #[error("{0}")]
    Failed(String),
}

/// Token stream produced by a large model invocation.
pub enum TokenFeed {
    /// Every token with its arrival time, known up front.
    Scheduled(Vec<ResponseToken>),
    /// Tokens arriving from another thread as they are produced.
    Live(Receiver<LiveEvent>),
}

impl std::fmt::Debug for TokenFeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TokenFeed::Scheduled(t) => f.debug_tuple("Scheduled").field(t).finish(),
            TokenFeed::Live(_) => f.write_str("Live(..)"),
        }
    }
}

#[derive(Debug)]
pub enum LiveEvent {
    Token { text: String, at: Instant },
    Done,
    Failed(ComponentError),
}

/// The large model: final transcript in, timed tokens out.
pub trait LargeModel: Send + Sync {
    /// Starts generation at session time `t0_ms`.
    fn invoke(&self, transcript: &str, t0_ms: u64) -> Result<TokenFeed, ComponentError>;
}
