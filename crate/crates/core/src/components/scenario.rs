use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ComponentError;
use crate::config::TimingConfig;

/// One scripted ASR emission: the partial transcript available once input
/// audio up to `end_ms` has been decoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioChunk {
    pub end_ms: u64,
    pub partial: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    #[serde(default)]
    pub connective: String,
    #[serde(default)]
    pub response: String,
}

/// Per-scenario timing overrides, keyed like the timing config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingOverrides {
    #[serde(
        rename = "asr.final_tail_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub asr_final_tail_ms: Option<u64>,
    #[serde(
        rename = "llm.first_token_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub llm_first_token_ms: Option<u64>,
    #[serde(
        rename = "llm.per_token_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub llm_per_token_ms: Option<u64>,
    #[serde(
        rename = "tts.first_chunk_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub tts_first_chunk_ms: Option<u64>,
    #[serde(
        rename = "tts.chunk_duration_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub tts_chunk_duration_ms: Option<u64>,
    #[serde(
        rename = "small.step_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub small_step_ms: Option<u64>,
    #[serde(
        rename = "small.eval_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub small_eval_ms: Option<u64>,
    #[serde(
        rename = "small.decode_ms",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub small_decode_ms: Option<u64>,
}

impl TimingOverrides {
    pub fn apply(&self, base: &TimingConfig) -> TimingConfig {
        let mut t = base.clone();
        if let Some(v) = self.asr_final_tail_ms {
            t.asr.final_tail_ms = v;
            t.asr.final_tail_jitter_ms = 0;
        }
        if let Some(v) = self.llm_first_token_ms {
            t.llm.first_token_ms = v;
            t.llm.first_token_jitter_ms = 0;
        }
        if let Some(v) = self.llm_per_token_ms {
            t.llm.per_token_ms = v;
        }
        if let Some(v) = self.tts_first_chunk_ms {
            t.tts.first_chunk_ms = v;
        }
        if let Some(v) = self.tts_chunk_duration_ms {
            t.tts.chunk_duration_ms = v;
        }
        if let Some(v) = self.small_step_ms {
            t.small.step_ms = v;
        }
        if let Some(v) = self.small_eval_ms {
            t.small.eval_ms = v;
        }
        if let Some(v) = self.small_decode_ms {
            t.small.decode_ms = v;
        }
        t
    }
}

/// Scripted small-model behavior: the commit confidence it reports for each
/// hypothesis in order (every partial, then the final transcript).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallScript {
    pub connective: String,
    pub confidence: Vec<f64>,
}

/// One scripted dialogue turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub input_audio_ms: u64,
    pub chunks: Vec<ScenarioChunk>,
    pub final_transcript: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small: Option<SmallScript>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ComponentError> {
        let err = |reason: String| ComponentError::Scenario {
            id: self.id.clone(),
            reason,
        };
        if self.input_audio_ms == 0 {
            return Err(err("input_audio_ms must be positive".into()));
        }
        for w in self.chunks.windows(2) {
            if w[1].end_ms < w[0].end_ms {
                return Err(err(format!(
                    "chunk times decrease: {} then {}",
                    w[0].end_ms, w[1].end_ms
                )));
            }
        }
        if let Some(last) = self.chunks.last() {
            if last.end_ms > self.input_audio_ms {
                return Err(err(format!(
                    "chunk at {} ms is past the end of input ({} ms)",
                    last.end_ms, self.input_audio_ms
                )));
            }
        }
        if self.final_transcript.trim().is_empty() {
            return Err(err("final transcript is empty".into()));
        }
        if let Some(script) = &self.small {
            if script.confidence.len() != self.chunks.len() + 1 {
                return Err(err(format!(
                    "small.confidence has {} values, expected one per partial plus the final ({})",
                    script.confidence.len(),
                    self.chunks.len() + 1
                )));
            }
            if let Some(c) = script.confidence.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return Err(err(format!("small.confidence value {c} outside [0, 1]")));
            }
            if script.connective.trim().is_empty() {
                return Err(err("small.connective is empty".into()));
            }
        }
        Ok(())
    }

    /// Delivery times of the 500 ms input chunks; the last one is the end of input.
    pub fn input_chunk_times(&self) -> Vec<u64> {
        let n = crate::math::chunks_for(self.input_audio_ms) as u64;
        (1..=n)
            .map(|i| (i * crate::math::CHUNK_MS).min(self.input_audio_ms))
            .collect()
    }

    pub fn effective_timing(&self, base: &TimingConfig) -> TimingConfig {
        match &self.timing {
            Some(o) => o.apply(base),
            None => base.clone(),
        }
    }
}

pub fn read_scenarios(reader: impl BufRead) -> Result<Vec<Scenario>, ComponentError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ComponentError::Failed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Scenario = serde_json::from_str(&line).map_err(|e| ComponentError::Scenario {
            id: format!("line {}", i + 1),
            reason: e.to_string(),
        })?;
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_scenarios(mut w: impl Write, scenarios: &[Scenario]) -> std::io::Result<()> {
    for s in scenarios {
        let line = serde_json::to_string(s).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scenario_line() {
        let text = r#"{"id":"a","input_audio_ms":1200,"chunks":[{"end_ms":500,"partial":"how"},{"end_ms":1000,"partial":"how are"}],"final_transcript":"how are you","reference":{"connective":"Well,","response":"Fine."},"timing":{"llm.first_token_ms":650}}"#;
        let v = read_scenarios(text.as_bytes()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].input_chunk_times(), vec![500, 1000, 1200]);
        let t = v[0].effective_timing(&TimingConfig::default());
        assert_eq!(t.llm.first_token_ms, 650);
    }

    #[test]
    fn unknown_timing_key_rejected() {
        let text = r#"{"id":"a","input_audio_ms":500,"chunks":[],"final_transcript":"x","timing":{"llm.bogus":1}}"#;
        assert!(read_scenarios(text.as_bytes()).is_err());
    }

    #[test]
    fn chunk_past_input_end_rejected() {
        let s = Scenario {
            id: "x".into(),
            input_audio_ms: 500,
            chunks: vec![ScenarioChunk {
                end_ms: 900,
                partial: "a".into(),
            }],
            final_transcript: "a".into(),
            reference: None,
            timing: None,
            small: None,
        };
        assert!(s.validate().is_err());
    }
}
