//! Per-step connective evaluation, the confidence gate and earliest-commit
//! selection.

use std::cmp::Ordering;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::SmallModel;
use crate::math::{self, MathError, TokenDistribution};

/// One streaming ASR decoding result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialHypothesis {
    pub step: u32,
    pub text: String,
    pub audio_offset_ms: u64,
    pub is_final: bool,
}

/// A candidate token with the distribution it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateToken {
    pub text: String,
    pub dist: TokenDistribution,
    pub is_marker: bool,
}

/// A connective proposed by the small model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectiveCandidate {
    tokens: Vec<CandidateToken>,
    model_score: f64,
}

impl ConnectiveCandidate {
    pub fn new(tokens: Vec<CandidateToken>, model_score: f64) -> Result<Self, MathError> {
        if tokens.is_empty() {
            return Err(MathError::EmptyCandidate);
        }
        if !(0.0..=1.0).contains(&model_score) {
            return Err(MathError::InvalidProbability(model_score));
        }
        Ok(Self {
            tokens,
            model_score,
        })
    }

    pub fn tokens(&self) -> &[CandidateToken] {
        &self.tokens
    }

    pub fn model_score(&self) -> f64 {
        self.model_score
    }

    /// Non-marker token texts joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .filter(|t| !t.is_marker)
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn mean_entropy(&self) -> Result<f64, MathError> {
        math::mean_connective_entropy(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub tau: f64,
    pub h_max: f64,
    pub m: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            tau: 0.45,
            h_max: 2.0,
            m: 5,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(PolicyError::Config(format!(
                "tau {} outside [0, 1]",
                self.tau
            )));
        }
        if !(self.h_max > 0.0) || !self.h_max.is_finite() {
            return Err(PolicyError::Config(format!(
                "h_max {} must be positive",
                self.h_max
            )));
        }
        if self.m == 0 {
            return Err(PolicyError::Config("m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of evaluating one partial hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitDecision {
    pub step: u32,
    pub candidates: Vec<ConnectiveCandidate>,
    pub conf: f64,
    pub sig: bool,
    pub chosen: Option<ConnectiveCandidate>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("decision steps out of order: {prev} then {next}")]
    OutOfOrder { prev: u32, next: u32 },
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("invalid policy config: {0}")]
    Config(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Queries the small model on one hypothesis and applies the confidence gate.
///
/// A model that returns nothing, or candidates the gate cannot score, yields a
/// non-committing decision instead of an error.
pub fn evaluate_step(
    small: &dyn SmallModel,
    hyp: &PartialHypothesis,
    cfg: &PolicyConfig,
) -> CommitDecision {
    let mut candidates = small.candidates(&hyp.text, cfg.m);
    candidates.truncate(cfg.m);
    let conf = if candidates.is_empty() {
        0.0
    } else {
        math::confidence(&candidates, cfg.h_max).unwrap_or(0.0)
    };
    let sig = !candidates.is_empty() && conf > cfg.tau;
    let chosen = if sig {
        select_connective(&candidates).ok().cloned()
    } else {
        None
    };
    CommitDecision {
        step: hyp.step,
        sig: chosen.is_some(),
        candidates,
        conf,
        chosen,
    }
}

/// Earliest step whose commit signal is set.
pub fn commit_point(decisions: &[CommitDecision]) -> Result<Option<u32>, PolicyError> {
    for w in decisions.windows(2) {
        if w[1].step <= w[0].step {
            return Err(PolicyError::OutOfOrder {
                prev: w[0].step,
                next: w[1].step,
            });
        }
    }
    Ok(decisions.iter().find(|d| d.sig).map(|d| d.step))
}

/// Lowest mean entropy wins; ties go to the higher model score, then to the
/// lexicographically smaller token sequence.
pub fn select_connective(
    candidates: &[ConnectiveCandidate],
) -> Result<&ConnectiveCandidate, PolicyError> {
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        scored.push((c.mean_entropy()?, c));
    }
    scored
        .into_iter()
        .min_by(|(ha, a), (hb, b)| {
            ha.total_cmp(hb)
                .then_with(|| b.model_score.total_cmp(&a.model_score))
                .then_with(|| token_order(a, b))
        })
        .map(|(_, c)| c)
        .ok_or(PolicyError::NoCandidates)
}

fn token_order(a: &ConnectiveCandidate, b: &ConnectiveCandidate) -> Ordering {
    a.tokens
        .iter()
        .map(|t| &t.text)
        .cmp(b.tokens.iter().map(|t| &t.text))
}

/// Single-assignment holder for the committed decision of one stream.
#[derive(Debug, Default)]
pub struct CommitLatch {
    committed: OnceLock<CommitDecision>,
}

impl CommitLatch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Latches `decision` if it commits and nothing is latched yet. Returns
    /// true only for the call that latched.
    pub fn offer(&self, decision: &CommitDecision) -> bool {
        if !decision.sig {
            return false;
        }
        self.committed.set(decision.clone()).is_ok()
    }

    pub fn get(&self) -> Option<&CommitDecision> {
        self.committed.get()
    }

    pub fn is_committed(&self) -> bool {
        self.committed.get().is_some()
    }
}
