//! Runs dialogue turns under the three response strategies and records their
//! timelines.

mod batch;
mod engine;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::ComponentError;

pub use batch::{run_batch, run_scenario, BatchOptions, ComponentFactory, StandardFactory};
pub use engine::{join_tokens, run_session, SessionComponents, UNIT_MAX_TOKENS};
pub use trace::{read_traces, write_traces, EventKind, SessionTrace, TraceEvent};

/// How the small and large models are combined for one turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Single stream: the large model runs after the final transcript.
    Ssc,
    /// Both models start on the final transcript; connective played first.
    Sdc,
    /// Connective committed from partial transcripts while the user speaks.
    Ddtsr,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Ssc, Strategy::Sdc, Strategy::Ddtsr];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ssc => "SSC",
            Strategy::Sdc => "SDC",
            Strategy::Ddtsr => "DDTSR",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = OrchestratorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ssc" => Ok(Strategy::Ssc),
            "sdc" => Ok(Strategy::Sdc),
            "ddtsr" => Ok(Strategy::Ddtsr),
            _ => Err(OrchestratorError::UnknownStrategy(s.to_string())),
        }
    }
}

/// Virtual time is simulated and deterministic; realtime follows the wall clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    Virtual,
    Realtime,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error("unknown strategy {0:?} (expected ssc, sdc or ddtsr)")]
    UnknownStrategy(String),
    #[error("trace {session}: {reason}")]
    InvalidTrace { session: String, reason: String },
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Component(#[from] ComponentError),
}
