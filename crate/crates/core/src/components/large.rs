use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::small::normalize_text;
use super::{ComponentError, LargeModel, TokenFeed};

/// A response token and its arrival time on the session clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseToken {
    pub text: String,
    pub t_ms: u64,
}

/// Emitted when a transcript has no scripted response.
pub const FALLBACK_RESPONSE: &str = "Sorry, could you say that again?";

/// Large model with fixed first-token and per-token latencies.
#[derive(Debug, Clone)]
pub struct ScriptedLargeModel {
    first_token_ms: u64,
    per_token_ms: u64,
    responses: HashMap<String, Vec<String>>,
    fallback: Vec<String>,
}

/// Responses are looked up by normalized transcript.
pub fn scripted_large_model(
    first_token_ms: u64,
    per_token_ms: u64,
    response_lookup: impl IntoIterator<Item = (String, Vec<String>)>,
) -> Result<ScriptedLargeModel, ComponentError> {
    if first_token_ms == 0 {
        return Err(ComponentError::Config(
            "llm first_token_ms must be positive".into(),
        ));
    }
    Ok(ScriptedLargeModel {
        first_token_ms,
        per_token_ms,
        responses: response_lookup
            .into_iter()
            .map(|(k, v)| (normalize_text(&k).join(" "), v))
            .collect(),
        fallback: crate::math::tokenize(FALLBACK_RESPONSE),
    })
}

impl ScriptedLargeModel {
    pub fn response_for(&self, transcript: &str) -> &[String] {
        self.responses
            .get(&normalize_text(transcript).join(" "))
            .filter(|r| !r.is_empty())
            .unwrap_or(&self.fallback)
    }

    pub fn schedule(&self, transcript: &str, t0_ms: u64) -> Vec<ResponseToken> {
        self.response_for(transcript)
            .iter()
            .enumerate()
            .map(|(i, t)| ResponseToken {
                text: t.clone(),
                t_ms: t0_ms + self.first_token_ms + i as u64 * self.per_token_ms,
            })
            .collect()
    }
}

impl LargeModel for ScriptedLargeModel {
    fn invoke(&self, transcript: &str, t0_ms: u64) -> Result<TokenFeed, ComponentError> {
        Ok(TokenFeed::Scheduled(self.schedule(transcript, t0_ms)))
    }
}
