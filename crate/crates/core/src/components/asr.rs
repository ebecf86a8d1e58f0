use super::scenario::Scenario;
use super::ComponentError;
use crate::policy::PartialHypothesis;

/// A hypothesis stamped with its emission time on the session clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedHypothesis {
    pub t_ms: u64,
    pub hyp: PartialHypothesis,
}

/// Streaming recognizer: a finite, ordered run of hypotheses ending in a final one.
pub trait AsrSource: Send + Sync {
    fn hypotheses(&self) -> &[TimedHypothesis];
}

/// Replays a scenario's scripted partials.
#[derive(Debug, Clone)]
pub struct ScriptedAsr {
    stream: Vec<TimedHypothesis>,
}

impl AsrSource for ScriptedAsr {
    fn hypotheses(&self) -> &[TimedHypothesis] {
        &self.stream
    }
}

/// One partial per scripted chunk at its `end_ms`, then the final transcript
/// at `input_audio_ms + final_tail_ms`.
pub fn scripted_asr_stream(
    scenario: &Scenario,
    final_tail_ms: u64,
) -> Result<ScriptedAsr, ComponentError> {
    scenario.validate()?;
    let mut stream = Vec::with_capacity(scenario.chunks.len() + 1);
    for (i, c) in scenario.chunks.iter().enumerate() {
        stream.push(TimedHypothesis {
            t_ms: c.end_ms,
            hyp: PartialHypothesis {
                step: i as u32 + 1,
                text: c.partial.clone(),
                audio_offset_ms: c.end_ms,
                is_final: false,
            },
        });
    }
    stream.push(TimedHypothesis {
        t_ms: scenario.input_audio_ms + final_tail_ms,
        hyp: PartialHypothesis {
            step: scenario.chunks.len() as u32 + 1,
            text: scenario.final_transcript.clone(),
            audio_offset_ms: scenario.input_audio_ms,
            is_final: true,
        },
    });
    Ok(ScriptedAsr { stream })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::ScenarioChunk;

    fn scenario(chunks: &[(u64, &str)], input: u64) -> Scenario {
        Scenario {
            id: "s".into(),
            input_audio_ms: input,
            chunks: chunks
                .iter()
                .map(|&(end_ms, p)| ScenarioChunk {
                    end_ms,
                    partial: p.into(),
                })
                .collect(),
            final_transcript: "how are you".into(),
            reference: None,
            timing: None,
            small: None,
        }
    }

    #[test]
    fn final_follows_tail() {
        let s = scenario(
            &[(500, "how"), (1000, "how are"), (1500, "how are you")],
            1500,
        );
        let asr = scripted_asr_stream(&s, 300).unwrap();
        let h = asr.hypotheses();
        assert_eq!(h.len(), 4);
        assert_eq!(
            h.iter().map(|t| t.t_ms).collect::<Vec<_>>(),
            vec![500, 1000, 1500, 1800]
        );
        assert!(h.last().unwrap().hyp.is_final);
        assert_eq!(h.iter().filter(|t| t.hyp.is_final).count(), 1);
        assert!(h.windows(2).all(|w| w[0].hyp.step < w[1].hyp.step));
    }

    #[test]
    fn single_partial() {
        let s = scenario(&[(400, "hi")], 400);
        let asr = scripted_asr_stream(&s, 350).unwrap();
        let finals: Vec<_> = asr.hypotheses().iter().filter(|t| t.hyp.is_final).collect();
        assert_eq!(finals.len(), 1);
        assert_eq!(finals[0].t_ms, 750);
    }

    #[test]
    fn empty_partials_pass_through() {
        let s = scenario(&[(500, ""), (1000, "how")], 1000);
        let asr = scripted_asr_stream(&s, 300).unwrap();
        assert_eq!(asr.hypotheses()[0].hyp.text, "");
        assert_eq!(asr.hypotheses().len(), 3);
    }

    #[test]
    fn non_monotonic_schedule_rejected() {
        let s = scenario(&[(1000, "a"), (500, "a b")], 1000);
        assert!(matches!(
            scripted_asr_stream(&s, 300),
            Err(ComponentError::Scenario { .. })
        ));
    }
}
