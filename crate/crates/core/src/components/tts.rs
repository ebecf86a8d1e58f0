use super::ComponentError;

/// A synthesized audio chunk before it is placed on the playback timeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthChunk {
    pub ready_ms: u64,
    pub duration_ms: u64,
    pub text_covered: String,
}

/// Incremental speech synthesis for one logical stream.
pub trait TtsEngine: Send {
    /// Queues `text` at session time `t_ms` and returns the chunks it yields.
    fn submit(&mut self, text: &str, t_ms: u64) -> Vec<SynthChunk>;
}

/// Fixed-rate synthesizer.
///
/// An idle synthesizer needs `first_chunk_ms` before its first chunk; after
/// that each chunk of `chunk_duration_ms` audio takes
/// `chunk_duration_ms / ms_audio_per_ms_synth` to produce. Text submitted
/// while the synthesizer is still busy continues from where it left off,
/// without paying the start-up latency again.
#[derive(Debug, Clone)]
pub struct SimulatedTts {
    first_chunk_ms: u64,
    ms_audio_per_ms_synth: f64,
    chunk_duration_ms: u64,
    ms_per_char: u64,
    busy_until: Option<u64>,
}

impl SimulatedTts {
    pub fn new(
        first_chunk_ms: u64,
        ms_audio_per_ms_synth: f64,
        chunk_duration_ms: u64,
        ms_per_char: u64,
    ) -> Result<Self, ComponentError> {
        if first_chunk_ms == 0 || chunk_duration_ms == 0 || ms_per_char == 0 {
            return Err(ComponentError::Config(
                "tts durations must be positive".into(),
            ));
        }
        if !(ms_audio_per_ms_synth >= 1.0) || !ms_audio_per_ms_synth.is_finite() {
            return Err(ComponentError::Config(format!(
                "tts synthesis rate {ms_audio_per_ms_synth} must be at least real time"
            )));
        }
        Ok(Self {
            first_chunk_ms,
            ms_audio_per_ms_synth,
            chunk_duration_ms,
            ms_per_char,
            busy_until: None,
        })
    }

    fn synth_step_ms(&self) -> u64 {
        (self.chunk_duration_ms as f64 / self.ms_audio_per_ms_synth).ceil() as u64
    }
}

impl TtsEngine for SimulatedTts {
    fn submit(&mut self, text: &str, t_ms: u64) -> Vec<SynthChunk> {
        let text = text.trim();
        if text.is_empty() {
            return Vec::new();
        }
        let audio_ms = text.chars().count() as u64 * self.ms_per_char;
        let n = audio_ms.div_ceil(self.chunk_duration_ms).max(1) as usize;
        let step = self.synth_step_ms();
        let first_ready = match self.busy_until {
            Some(busy) if busy >= t_ms => busy + step,
            _ => t_ms + self.first_chunk_ms,
        };
        let pieces = split_text(text, n);
        let chunks: Vec<SynthChunk> = pieces
            .into_iter()
            .enumerate()
            .map(|(i, piece)| SynthChunk {
                ready_ms: first_ready + i as u64 * step,
                duration_ms: self.chunk_duration_ms,
                text_covered: piece,
            })
            .collect();
        self.busy_until = chunks.last().map(|c| c.ready_ms);
        chunks
    }
}

/// Splits `text` into `n` word-aligned pieces of roughly equal size; pieces
/// may be empty when there are fewer words than chunks.
fn split_text(text: &str, n: usize) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    (0..n)
        .map(|i| {
            let lo = i * words.len() / n;
            let hi = (i + 1) * words.len() / n;
            words[lo..hi].join(" ")
        })
        .collect()
}
