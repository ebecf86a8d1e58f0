use std::sync::Arc;

use dualtrack_core::components::{
    ComponentError, LargeModel, Reference, Scenario, ScenarioChunk, SmallModel, SmallScript,
};
use dualtrack_core::config::{SessionTiming, TimingConfig};
use dualtrack_core::orchestrator::{
    read_traces, run_batch, write_traces, BatchOptions, Clock, ComponentFactory, EventKind,
    SessionTrace, StandardFactory, Strategy,
};
use dualtrack_core::policy::PolicyConfig;
use proptest::prelude::*;

fn scenario(id: &str, confidence: Vec<f64>) -> Scenario {
    Scenario {
        id: id.into(),
        input_audio_ms: 2000,
        chunks: [
            (500, "how"),
            (1000, "how are"),
            (1500, "how are you"),
            (2000, "how are you doing"),
        ]
        .iter()
        .map(|&(end_ms, p)| ScenarioChunk {
            end_ms,
            partial: p.into(),
        })
        .collect(),
        final_transcript: "How are you doing today?".into(),
        reference: Some(Reference {
            connective: "Well,".into(),
            response: "Pretty good, thanks.".into(),
        }),
        timing: None,
        small: Some(SmallScript {
            connective: "Well,".into(),
            confidence,
        }),
    }
}

fn timing() -> TimingConfig {
    let mut t = TimingConfig::default();
    t.asr.final_tail_ms = 350;
    t.llm.first_token_ms = 500;
    t.llm.per_token_ms = 0;
    t.tts.first_chunk_ms = 150;
    t.small.eval_ms = 90;
    t.small.decode_ms = 285;
    t
}

fn options(strategy: Strategy, timing: TimingConfig) -> BatchOptions {
    BatchOptions {
        strategy,
        policy: PolicyConfig::default(),
        timing,
        seed: 7,
        clock: Clock::Virtual,
        jobs: 1,
    }
}

fn run(strategy: Strategy, s: &Scenario) -> SessionTrace {
    let factory = StandardFactory::new(2.0);
    let trace = run_batch(
        std::slice::from_ref(s),
        &factory,
        &options(strategy, timing()),
    )
    .pop()
    .unwrap();
    trace.validate().unwrap();
    assert!(!trace.is_error(), "{:?}", trace.error());
    trace
}

const COMMIT_AT_LAST_PARTIAL: [f64; 5] = [0.1, 0.2, 0.3, 0.9, 0.95];

#[test]
fn ssc_hand_trace() {
    let t = run(
        Strategy::Ssc,
        &scenario("a", COMMIT_AT_LAST_PARTIAL.to_vec()),
    );
    assert_eq!(t.last("input_chunk_sent"), Some(2000));
    assert_eq!(t.first("asr_final"), Some(2350));
    assert_eq!(t.first("large_invoked"), Some(2350));
    assert_eq!(t.first("large_first_token"), Some(2850));
    assert_eq!(t.first("audio_play_start"), Some(3000));
    assert_eq!(t.count("small_eval"), 0);
    assert!(!t.connective_emitted());
}

#[test]
fn ddtsr_hand_trace() {
    let t = run(
        Strategy::Ddtsr,
        &scenario("a", COMMIT_AT_LAST_PARTIAL.to_vec()),
    );
    assert_eq!(t.first("commit"), Some(2090));
    assert_eq!(t.first("connective_text"), Some(2375));
    assert_eq!(t.first("audio_play_start"), Some(2525));
    assert_eq!(t.first("large_invoked"), t.first("asr_final"));
    // partials 1-4 evaluated; the final transcript is not needed after commit
    assert_eq!(t.count("small_eval"), 4);
    let starts: Vec<(u64, String)> = t
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::AudioPlayStart { stream, .. } => Some((e.t_ms, format!("{stream:?}"))),
            _ => None,
        })
        .collect();
    assert_eq!(starts[0], (2525, "Connective".into()));
    // "Well," is one 400 ms chunk ending at 2925; main audio is ready at 3000
    assert_eq!(starts[1], (3000, "Main".into()));
    let gap = t.events.iter().find_map(|e| match e.kind {
        EventKind::Handoff { gap_ms } => Some(gap_ms),
        _ => None,
    });
    assert_eq!(gap, Some(75));
}

#[test]
fn sdc_evaluates_only_the_final_transcript() {
    let t = run(
        Strategy::Sdc,
        &scenario("a", COMMIT_AT_LAST_PARTIAL.to_vec()),
    );
    assert_eq!(t.count("small_eval"), 1);
    assert_eq!(t.first("commit"), Some(2440));
    assert_eq!(t.first("audio_play_start"), Some(2875));
    // main waits for the connective to finish at 3275
    let main_start = t.events.iter().find_map(|e| match &e.kind {
        EventKind::AudioPlayStart { stream, .. } if format!("{stream:?}") == "Main" => Some(e.t_ms),
        _ => None,
    });
    assert_eq!(main_start, Some(3275));
}

#[test]
fn ddtsr_without_commit_matches_sdc_structure() {
    let s = scenario("a", vec![0.1; 5]);
    let d = run(Strategy::Ddtsr, &s);
    let c = run(Strategy::Sdc, &s);
    assert!(!d.connective_emitted());
    assert!(!c.connective_emitted());
    assert_eq!(d.first("audio_play_start"), c.first("audio_play_start"));
    let playback = |t: &SessionTrace| -> Vec<(u64, String)> {
        t.events
            .iter()
            .filter(|e| e.kind.name().starts_with("audio_"))
            .map(|e| (e.t_ms, e.kind.name().to_string()))
            .collect()
    };
    assert_eq!(playback(&d), playback(&c));
}

#[test]
fn commit_respects_evaluation_time() {
    let t = run(Strategy::Ddtsr, &scenario("a", vec![0.9; 5]));
    // the first partial at 500 commits after one evaluation
    assert_eq!(t.first("commit"), Some(590));
    // the connective still waits for the user to finish
    assert_eq!(t.first("audio_play_start"), Some(2000));
}

#[test]
fn traces_are_deterministic_and_round_trip() {
    let scenarios: Vec<Scenario> = (0..3)
        .map(|i| scenario(&format!("s{i}"), COMMIT_AT_LAST_PARTIAL.to_vec()))
        .collect();
    let mut t = timing();
    t.asr.final_tail_jitter_ms = 50;
    t.llm.first_token_jitter_ms = 200;
    let factory = StandardFactory::new(2.0);
    let serialize = |jobs| {
        let mut opts = options(Strategy::Ddtsr, t.clone());
        opts.jobs = jobs;
        let traces = run_batch(&scenarios, &factory, &opts);
        let mut buf = Vec::new();
        write_traces(&mut buf, &traces).unwrap();
        (traces, buf)
    };
    let (traces, a) = serialize(1);
    let (_, b) = serialize(3);
    assert_eq!(a, b);
    assert_eq!(
        traces
            .iter()
            .map(|t| t.session.as_str())
            .collect::<Vec<_>>(),
        vec!["s0", "s1", "s2"]
    );
    assert_eq!(read_traces(a.as_slice()).unwrap(), traces);
}

struct FailingFactory {
    inner: StandardFactory,
    fail_id: &'static str,
}

struct BrokenLarge;

impl LargeModel for BrokenLarge {
    fn invoke(
        &self,
        _: &str,
        _: u64,
    ) -> Result<dualtrack_core::components::TokenFeed, ComponentError> {
        Err(ComponentError::Failed("model crashed".into()))
    }
}

impl ComponentFactory for FailingFactory {
    fn small(&self, s: &Scenario) -> Result<Arc<dyn SmallModel>, ComponentError> {
        self.inner.small(s)
    }

    fn large(
        &self,
        s: &Scenario,
        timing: &SessionTiming,
    ) -> Result<Box<dyn LargeModel>, ComponentError> {
        if s.id == self.fail_id {
            Ok(Box::new(BrokenLarge))
        } else {
            self.inner.large(s, timing)
        }
    }
}

#[test]
fn failing_session_is_isolated() {
    let scenarios: Vec<Scenario> = (0..3)
        .map(|i| scenario(&format!("s{i}"), COMMIT_AT_LAST_PARTIAL.to_vec()))
        .collect();
    let factory = FailingFactory {
        inner: StandardFactory::new(2.0),
        fail_id: "s1",
    };
    let traces = run_batch(&scenarios, &factory, &options(Strategy::Ddtsr, timing()));
    assert_eq!(traces.len(), 3);
    assert!(!traces[0].is_error());
    assert!(!traces[2].is_error());
    assert_eq!(traces[1].error(), Some("model crashed"));
    assert_eq!(traces[1].events.last().unwrap().kind.name(), "error");
    assert_eq!(traces[1].first("audio_play_start"), None);
}

#[test]
fn missing_small_model_is_a_session_error() {
    let mut s = scenario("a", COMMIT_AT_LAST_PARTIAL.to_vec());
    s.small = None;
    let factory = StandardFactory::new(2.0);
    let t = run_batch(&[s], &factory, &options(Strategy::Ddtsr, timing()));
    assert!(t[0].error().unwrap().contains("small"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn earlier_strategies_speak_no_later(
        tail in 200u64..600,
        first_token in 400u64..900,
        per_token in 0u64..40,
        eval in 20u64..150,
        decode in 50u64..300,
        commit_at in 0usize..6,
    ) {
        prop_assume!(eval <= tail);
        prop_assume!(eval + decode <= first_token);
        let conf: Vec<f64> = (0..5).map(|i| if i >= commit_at { 0.9 } else { 0.1 }).collect();
        let s = scenario("p", conf);
        let mut t = timing();
        t.asr.final_tail_ms = tail;
        t.llm.first_token_ms = first_token;
        t.llm.per_token_ms = per_token;
        t.small.eval_ms = eval;
        t.small.decode_ms = decode;
        let factory = StandardFactory::new(2.0);
        let first_audio = |st| {
            let tr = run_batch(std::slice::from_ref(&s), &factory, &options(st, t.clone())).pop().unwrap();
            tr.validate().unwrap();
            if st != Strategy::Ssc {
                prop_assert_eq!(tr.first("large_invoked"), tr.first("asr_final"));
            }
            Ok(tr.first("audio_play_start").unwrap())
        };
        let d = first_audio(Strategy::Ddtsr)?;
        let c = first_audio(Strategy::Sdc)?;
        let s0 = first_audio(Strategy::Ssc)?;
        prop_assert!(d <= c, "ddtsr {} sdc {}", d, c);
        prop_assert!(c <= s0, "sdc {} ssc {}", c, s0);
    }
}
