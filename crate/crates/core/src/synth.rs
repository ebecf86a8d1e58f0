//! Seeded generator of synthetic scenarios with scripted small-model
//! confidence, for benchmarking the strategies without real models.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::components::{Reference, Scenario, ScenarioChunk, SmallScript};
use crate::math::CHUNK_MS;

const WORDS: &[&str] = &[
    "could",
    "you",
    "tell",
    "me",
    "what",
    "the",
    "weather",
    "is",
    "like",
    "in",
    "town",
    "today",
    "i",
    "was",
    "wondering",
    "whether",
    "we",
    "should",
    "book",
    "a",
    "table",
    "for",
    "dinner",
    "tonight",
    "my",
    "sister",
    "said",
    "that",
    "movie",
    "new",
    "really",
    "good",
    "but",
    "not",
    "sure",
    "about",
    "it",
    "how",
    "long",
    "does",
    "take",
    "to",
    "get",
    "station",
    "from",
    "here",
    "any",
    "ideas",
    "weekend",
    "trip",
    "plans",
];

const CONNECTIVES: &[&str] = &["Well,", "I see,", "Hmm,", "Right,", "Okay,", "So,", "Oh,"];

const RESPONSE_WORDS: &[&str] = &[
    "that", "sounds", "like", "a", "great", "idea", "and", "i", "think", "you", "could", "try",
    "it", "this", "evening", "if", "the", "weather", "holds", "up", "there", "is", "usually",
    "plenty", "of", "time", "to", "plan", "ahead",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub count: usize,
    /// Probability that a scenario's small model ever commits.
    pub commit_prob: f64,
    pub min_audio_ms: u64,
    pub max_audio_ms: u64,
    /// Commit threshold the confidence script is generated around.
    pub tau: f64,
    /// Given a commit, probability it happens on the last partial, on the
    /// final transcript, or earlier; normalized internally.
    pub commit_position_weights: [f64; 3],
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            count: 50,
            commit_prob: 0.94,
            min_audio_ms: 1500,
            max_audio_ms: 9000,
            tau: 0.45,
            commit_position_weights: [0.35, 0.6, 0.05],
            seed: 1,
        }
    }
}

/// Speaking rate used to lay out words over the input audio.
const MS_PER_WORD: u64 = 380;
/// Words the recognizer lags behind the audio in partial hypotheses.
const ASR_LAG_WORDS: usize = 1;

pub fn synthetic_scenarios(opts: &SynthOptions) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.count)
        .map(|i| one_scenario(&mut rng, i, opts))
        .collect()
}

fn one_scenario(rng: &mut ChaCha8Rng, index: usize, opts: &SynthOptions) -> Scenario {
    let input_audio_ms =
        rng.random_range(opts.min_audio_ms..=opts.max_audio_ms.max(opts.min_audio_ms));
    let n_words = ((input_audio_ms / MS_PER_WORD) as usize).max(2);
    let words: Vec<&str> = (0..n_words)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect();

    let n_chunks = crate::math::chunks_for(input_audio_ms) as u64;
    let chunks: Vec<ScenarioChunk> = (1..=n_chunks)
        .map(|k| {
            let end_ms = (k * CHUNK_MS).min(input_audio_ms);
            let heard = (n_words as u64 * end_ms / input_audio_ms) as usize;
            let shown = heard.saturating_sub(ASR_LAG_WORDS).max(1);
            ScenarioChunk {
                end_ms,
                partial: words[..shown].join(" "),
            }
        })
        .collect();
    let final_transcript = format!("{}?", words.join(" "));

    let connective = CONNECTIVES.choose(rng).expect("non-empty").to_string();
    let n_resp = rng.random_range(8..=20);
    let mut response: Vec<&str> = (0..n_resp)
        .map(|_| *RESPONSE_WORDS.choose(rng).expect("non-empty"))
        .collect();
    let last = response.len() - 1;
    let tail = format!("{}.", response[last]);
    response[last] = &tail;
    let response = response.join(" ");

    let steps = chunks.len() + 1;
    let commit_step = if rng.random_bool(opts.commit_prob.clamp(0.0, 1.0)) {
        Some(draw_commit_step(rng, steps, &opts.commit_position_weights))
    } else {
        None
    };
    let lo = (opts.tau - 0.1).max(0.0);
    let hi = (opts.tau + 0.1).min(1.0);
    let confidence = (0..steps)
        .map(|s| match commit_step {
            Some(c) if s >= c => round3(rng.random_range(hi..=0.95_f64.max(hi))),
            _ => round3(rng.random_range(0.0..=lo)),
        })
        .collect();

    Scenario {
        id: format!("syn-{index:04}"),
        input_audio_ms,
        chunks,
        final_transcript,
        reference: Some(Reference {
            connective: connective.clone(),
            response,
        }),
        timing: None,
        small: Some(SmallScript {
            connective,
            confidence,
        }),
    }
}

/// Index into `[partials..., final]` of the first confident hypothesis.
fn draw_commit_step(rng: &mut ChaCha8Rng, steps: usize, weights: &[f64; 3]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
    let last_partial = steps.saturating_sub(2);
    if u < weights[0] {
        last_partial
    } else if u < weights[0] + weights[1] {
        steps - 1
    } else if last_partial == 0 {
        0
    } else {
        rng.random_range(0..last_partial)
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
