use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{OrchestratorError, Strategy};
use crate::components::StreamId;

/// What happened at one instant of a session, with its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    InputChunkSent {
        chunk: u32,
        input_audio_ms: u64,
    },
    AsrPartial {
        step: u32,
        text: String,
    },
    AsrFinal {
        step: u32,
        text: String,
    },
    SmallEval {
        step: u32,
        conf: f64,
        sig: bool,
    },
    Commit {
        step: u32,
        conf: f64,
        connective: String,
    },
    ConnectiveText {
        text: String,
    },
    LargeInvoked {
        transcript: String,
    },
    LargeFirstToken {
        token: String,
    },
    TtsChunkReady {
        stream: StreamId,
        duration_ms: u64,
        text: String,
    },
    AudioPlayStart {
        stream: StreamId,
        duration_ms: u64,
        text: String,
    },
    AudioPlayEnd {
        stream: StreamId,
    },
    Handoff {
        gap_ms: u64,
    },
    Error {
        component: String,
        message: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::InputChunkSent { .. } => "input_chunk_sent",
            EventKind::AsrPartial { .. } => "asr_partial",
            EventKind::AsrFinal { .. } => "asr_final",
            EventKind::SmallEval { .. } => "small_eval",
            EventKind::Commit { .. } => "commit",
            EventKind::ConnectiveText { .. } => "connective_text",
            EventKind::LargeInvoked { .. } => "large_invoked",
            EventKind::LargeFirstToken { .. } => "large_first_token",
            EventKind::TtsChunkReady { .. } => "tts_chunk_ready",
            EventKind::AudioPlayStart { .. } => "audio_play_start",
            EventKind::AudioPlayEnd { .. } => "audio_play_end",
            EventKind::Handoff { .. } => "handoff",
            EventKind::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t_ms: u64,
    pub kind: EventKind,
}

/// Complete timeline of one dialogue turn under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub session: String,
    pub strategy: Strategy,
    pub input_audio_ms: u64,
    pub events: Vec<TraceEvent>,
}

impl SessionTrace {
    pub fn connective_emitted(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e.kind, EventKind::Commit { .. }))
    }

    pub fn is_error(&self) -> bool {
        self.error().is_some()
    }

    pub fn error(&self) -> Option<&str> {
        self.events.iter().find_map(|e| match &e.kind {
            EventKind::Error { message, .. } => Some(message.as_str()),
            _ => None,
        })
    }

    /// Time of the first event of the named kind.
    pub fn first(&self, kind: &str) -> Option<u64> {
        self.events
            .iter()
            .find(|e| e.kind.name() == kind)
            .map(|e| e.t_ms)
    }

    pub fn last(&self, kind: &str) -> Option<u64> {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind.name() == kind)
            .map(|e| e.t_ms)
    }

    pub fn count(&self, kind: &str) -> usize {
        self.events.iter().filter(|e| e.kind.name() == kind).count()
    }

    /// Checks the structural invariants every trace must satisfy.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |reason: String| OrchestratorError::InvalidTrace {
            session: self.session.clone(),
            reason,
        };
        for w in self.events.windows(2) {
            if w[1].t_ms < w[0].t_ms {
                return Err(bad(format!(
                    "{} at {} follows {} at {}",
                    w[1].kind.name(),
                    w[1].t_ms,
                    w[0].kind.name(),
                    w[0].t_ms
                )));
            }
        }
        if self.count("commit") > 1 {
            return Err(bad("more than one commit".into()));
        }
        if !self.is_error() && self.count("asr_final") != 1 {
            return Err(bad(format!("{} asr_final events", self.count("asr_final"))));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Line<'a> {
    #[serde(borrow)]
    session: std::borrow::Cow<'a, str>,
    strategy: Strategy,
    t_ms: u64,
    #[serde(flatten)]
    kind: EventKind,
}

/// Writes traces as JSON Lines, one event per line.
pub fn write_traces(mut w: impl Write, traces: &[SessionTrace]) -> std::io::Result<()> {
    for t in traces {
        for e in &t.events {
            let line = Line {
                session: std::borrow::Cow::Borrowed(&t.session),
                strategy: t.strategy,
                t_ms: e.t_ms,
                kind: e.kind.clone(),
            };
            let text = serde_json::to_string(&line).map_err(std::io::Error::other)?;
            writeln!(w, "{text}")?;
        }
    }
    Ok(())
}

/// Reads traces written by [`write_traces`]. Consecutive lines with the same
/// session and strategy form one trace.
pub fn read_traces(reader: impl BufRead) -> Result<Vec<SessionTrace>, OrchestratorError> {
    let mut out: Vec<SessionTrace> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| OrchestratorError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| OrchestratorError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let event = TraceEvent {
            t_ms: parsed.t_ms,
            kind: parsed.kind,
        };
        let same = out
            .last()
            .is_some_and(|t| t.session == parsed.session && t.strategy == parsed.strategy);
        if !same {
            out.push(SessionTrace {
                session: parsed.session.into_owned(),
                strategy: parsed.strategy,
                input_audio_ms: 0,
                events: Vec::new(),
            });
        }
        let trace = out.last_mut().expect("pushed above");
        if let EventKind::InputChunkSent { input_audio_ms, .. } = event.kind {
            trace.input_audio_ms = input_audio_ms;
        }
        trace.events.push(event);
    }
    Ok(out)
}
