use serde::{Deserialize, Serialize};

use super::tts::SynthChunk;
use super::ComponentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamId {
    Connective,
    Main,
}

/// A chunk of synthesized audio placed on the playback timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioChunk {
    pub stream_id: StreamId,
    pub ready_ms: u64,
    pub play_start_ms: u64,
    pub duration_ms: u64,
    pub text_covered: String,
}

impl AudioChunk {
    pub fn play_end_ms(&self) -> u64 {
        self.play_start_ms + self.duration_ms
    }
}

/// Places one stream's chunks back to back, each no earlier than it is ready
/// and the first no earlier than `not_before`.
pub fn layout_stream(
    stream_id: StreamId,
    chunks: &[SynthChunk],
    not_before: u64,
) -> Vec<AudioChunk> {
    let mut cursor = not_before;
    chunks
        .iter()
        .map(|c| {
            let start = c.ready_ms.max(cursor);
            cursor = start + c.duration_ms;
            AudioChunk {
                stream_id,
                ready_ms: c.ready_ms,
                play_start_ms: start,
                duration_ms: c.duration_ms,
                text_covered: c.text_covered.clone(),
            }
        })
        .collect()
}

fn check_stream(name: &str, chunks: &[AudioChunk]) -> Result<(), ComponentError> {
    for c in chunks {
        if c.play_start_ms < c.ready_ms {
            return Err(ComponentError::Config(format!(
                "{name} chunk plays at {} before it is ready at {}",
                c.play_start_ms, c.ready_ms
            )));
        }
    }
    for w in chunks.windows(2) {
        if w[1].play_start_ms < w[0].play_end_ms() {
            return Err(ComponentError::Config(format!(
                "{name} chunks overlap: [{}, {}) and [{}, ..)",
                w[0].play_start_ms,
                w[0].play_end_ms(),
                w[1].play_start_ms
            )));
        }
    }
    Ok(())
}

/// Plays the connective stream first and appends the main stream.
///
/// The main stream starts at the later of the connective's end and its own
/// scheduled start; later main chunks keep their order and never overlap.
pub fn concat_streams(
    connective: &[AudioChunk],
    main: &[AudioChunk],
) -> Result<Vec<AudioChunk>, ComponentError> {
    check_stream("connective", connective)?;
    check_stream("main", main)?;
    let mut out = connective.to_vec();
    let mut cursor = connective.last().map_or(0, AudioChunk::play_end_ms);
    for c in main {
        let start = c.play_start_ms.max(cursor);
        cursor = start + c.duration_ms;
        out.push(AudioChunk {
            play_start_ms: start,
            ..c.clone()
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn chunk(stream: StreamId, ready: u64, start: u64, dur: u64) -> AudioChunk {
        AudioChunk {
            stream_id: stream,
            ready_ms: ready,
            play_start_ms: start,
            duration_ms: dur,
            text_covered: String::new(),
        }
    }

    #[test]
    fn seamless_handoff_when_main_ready_early() {
        let conn = vec![chunk(StreamId::Connective, 2200, 2200, 400)];
        let main = vec![chunk(StreamId::Main, 2500, 2500, 400)];
        let out = concat_streams(&conn, &main).unwrap();
        assert_eq!(out[1].play_start_ms, 2600);
    }

    #[test]
    fn gap_when_main_late() {
        let conn = vec![chunk(StreamId::Connective, 2200, 2200, 400)];
        let main = vec![chunk(StreamId::Main, 2900, 2900, 400)];
        let out = concat_streams(&conn, &main).unwrap();
        assert_eq!(out[1].play_start_ms, 2900);
    }

    #[test]
    fn empty_connective_plays_main_at_ready() {
        let main = vec![chunk(StreamId::Main, 2900, 2900, 400)];
        let out = concat_streams(&[], &main).unwrap();
        assert_eq!(out[0].play_start_ms, 2900);
    }

    #[test]
    fn overlapping_input_rejected() {
        let conn = vec![
            chunk(StreamId::Connective, 0, 0, 400),
            chunk(StreamId::Connective, 100, 100, 400),
        ];
        assert!(concat_streams(&conn, &[]).is_err());
    }

    #[test]
    fn layout_respects_gate_and_readiness() {
        let synth = vec![
            SynthChunk {
                ready_ms: 100,
                duration_ms: 300,
                text_covered: "a".into(),
            },
            SynthChunk {
                ready_ms: 200,
                duration_ms: 300,
                text_covered: "b".into(),
            },
        ];
        let out = layout_stream(StreamId::Connective, &synth, 1000);
        assert_eq!(out[0].play_start_ms, 1000);
        assert_eq!(out[1].play_start_ms, 1300);
    }

    fn synth_stream() -> impl Strategy<Value = Vec<SynthChunk>> {
        prop::collection::vec((0u64..300, 1u64..500), 0..8).prop_map(|v| {
            let mut t = 0;
            v.into_iter()
                .map(|(dt, d)| {
                    t += dt;
                    SynthChunk {
                        ready_ms: t,
                        duration_ms: d,
                        text_covered: String::new(),
                    }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merged_timeline_is_non_overlapping(
            a in synth_stream(),
            b in synth_stream(),
            gate in 0u64..1000,
        ) {
            let conn = layout_stream(StreamId::Connective, &a, gate);
            let main = layout_stream(StreamId::Main, &b, gate);
            let out = concat_streams(&conn, &main).unwrap();
            let total: u64 = out.iter().map(|c| c.duration_ms).sum();
            let expect: u64 = a.iter().chain(&b).map(|c| c.duration_ms).sum();
            prop_assert_eq!(total, expect);
            for w in out.windows(2) {
                prop_assert!(w[1].play_start_ms >= w[0].play_end_ms());
            }
            for c in &out {
                prop_assert!(c.play_start_ms >= c.ready_ms);
            }
        }
    }
}
