//! Run configuration: a TOML file with one table per subsystem.
//!
//! ```toml
//! seed = 20240601
//!
//! [policy]
//! tau = 0.45
//! h_max = 2.0
//! m = 5
//!
//! [asr]
//! final_tail_ms = 350
//!
//! [llm]
//! first_token_ms = 500
//! ```
//!
//! Every key is optional; missing keys take the defaults below. Dotted keys
//! such as `policy.tau = 0.3` at the top level are equivalent TOML.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::Scenario;
use crate::math::{CurriculumOrder, LossWeights, DEFAULT_EPOCHS};
use crate::policy::PolicyConfig;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsrTiming {
    /// Finalization delay after the last input chunk.
    pub final_tail_ms: u64,
    /// Extra uniformly drawn tail in `[0, jitter]` per session.
    pub final_tail_jitter_ms: u64,
    /// Additional tail per second of input audio.
    pub tail_per_s_ms: u64,
}

impl Default for AsrTiming {
    fn default() -> Self {
        Self {
            final_tail_ms: 350,
            final_tail_jitter_ms: 0,
            tail_per_s_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmTiming {
    pub first_token_ms: u64,
    pub first_token_jitter_ms: u64,
    /// Additional first-token delay per second of input audio (prefill).
    pub first_token_per_s_ms: u64,
    pub per_token_ms: u64,
    /// Remote request timeout (connect and first byte).
    pub timeout_ms: u64,
}

impl Default for LlmTiming {
    fn default() -> Self {
        Self {
            first_token_ms: 500,
            first_token_jitter_ms: 0,
            first_token_per_s_ms: 0,
            per_token_ms: 15,
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtsTiming {
    pub first_chunk_ms: u64,
    pub chunk_duration_ms: u64,
    pub ms_audio_per_ms_synth: f64,
    /// Spoken duration per character of text.
    pub ms_per_char: u64,
}

impl Default for TtsTiming {
    fn default() -> Self {
        Self {
            first_chunk_ms: 150,
            chunk_duration_ms: 400,
            ms_audio_per_ms_synth: 4.0,
            ms_per_char: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallTiming {
    /// Minimum spacing between evaluated partials; 0 evaluates every one.
    pub step_ms: u64,
    /// Time for one candidate/commit evaluation.
    pub eval_ms: u64,
    /// Time to decode the committed connective text for synthesis.
    pub decode_ms: u64,
}

impl Default for SmallTiming {
    fn default() -> Self {
        Self {
            step_ms: 0,
            eval_ms: 90,
            decode_ms: 285,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub asr: AsrTiming,
    pub llm: LlmTiming,
    pub tts: TtsTiming,
    pub small: SmallTiming,
}

/// Concrete timings for one session after jitter and length scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTiming {
    pub final_tail_ms: u64,
    pub first_token_ms: u64,
    pub per_token_ms: u64,
    pub tts: TtsTiming,
    pub small: SmallTiming,
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.llm.first_token_ms == 0 {
            return Err(ConfigError::Invalid(
                "llm.first_token_ms must be positive".into(),
            ));
        }
        if self.tts.first_chunk_ms == 0
            || self.tts.chunk_duration_ms == 0
            || self.tts.ms_per_char == 0
        {
            return Err(ConfigError::Invalid(
                "tts durations must be positive".into(),
            ));
        }
        if !(self.tts.ms_audio_per_ms_synth >= 1.0) {
            return Err(ConfigError::Invalid(
                "tts.ms_audio_per_ms_synth must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Draws per-session timings. The draw depends only on `seed` and the
    /// scenario index, so every strategy sees the same timings for a scenario.
    pub fn for_session(&self, scenario: &Scenario, seed: u64, index: usize) -> SessionTiming {
        let t = scenario.effective_timing(self);
        let mut rng = session_rng(seed, index);
        let tail_jitter = rng.random_range(0..=t.asr.final_tail_jitter_ms);
        let token_jitter = rng.random_range(0..=t.llm.first_token_jitter_ms);
        let length_tail = t.asr.tail_per_s_ms * scenario.input_audio_ms / 1000;
        let prefill = t.llm.first_token_per_s_ms * scenario.input_audio_ms / 1000;
        SessionTiming {
            final_tail_ms: t.asr.final_tail_ms + tail_jitter + length_tail,
            first_token_ms: t.llm.first_token_ms + token_jitter + prefill,
            per_token_ms: t.llm.per_token_ms,
            tts: t.tts,
            small: t.small,
        }
    }
}

pub fn session_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub epochs: Vec<u32>,
    pub order: CurriculumOrder,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS.to_vec(),
            order: CurriculumOrder::HardToEasy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub dataset: String,
    pub model: String,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            dataset: "desk".into(),
            model: "scripted".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Dialogue dataset used to build the tabular small model.
    pub small_dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub policy: PolicyConfig,
    pub asr: AsrTiming,
    pub llm: LlmTiming,
    pub tts: TtsTiming,
    pub small: SmallTiming,
    pub loss: LossWeights,
    pub curriculum: CurriculumConfig,
    pub report: ReportConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            policy: PolicyConfig::default(),
            asr: AsrTiming::default(),
            llm: LlmTiming::default(),
            tts: TtsTiming::default(),
            small: SmallTiming::default(),
            loss: LossWeights::default(),
            curriculum: CurriculumConfig::default(),
            report: ReportConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file, resolving relative paths inside it against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.paths.small_dataset, path.parent()) {
            if p.is_relative() {
                cfg.paths.small_dataset = Some(dir.join(p));
            }
        }
        if let Some(p) = &cfg.paths.small_dataset {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!(
                    "paths.small_dataset {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.timing().validate()?;
        LossWeights::new(
            self.loss.lambda_con,
            self.loss.lambda_coh,
            self.loss.lambda_prior,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.curriculum.epochs.is_empty() {
            return Err(ConfigError::Invalid("curriculum.epochs is empty".into()));
        }
        Ok(())
    }

    pub fn timing(&self) -> TimingConfig {
        TimingConfig {
            asr: self.asr.clone(),
            llm: self.llm.clone(),
            tts: self.tts.clone(),
            small: self.small.clone(),
        }
    }
}
