use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use super::trace::{EventKind, SessionTrace, TraceEvent};
use super::{Clock, Strategy};
use crate::components::{
    concat_streams, layout_stream, AsrSource, LargeModel, LiveEvent, SmallModel, StreamId,
    SynthChunk, TokenFeed, TtsEngine,
};
use crate::config::SmallTiming;
use crate::policy::{evaluate_step, CommitDecision, CommitLatch, PartialHypothesis, PolicyConfig};

/// Tokens buffered before a main-stream unit is sent to synthesis when no
/// sentence-final punctuation shows up.
pub const UNIT_MAX_TOKENS: usize = 12;

/// Everything one session runs against.
pub struct SessionComponents<'a> {
    pub asr: &'a dyn AsrSource,
    pub small: &'a dyn SmallModel,
    pub large: &'a dyn LargeModel,
    pub connective_tts: &'a mut dyn TtsEngine,
    pub main_tts: &'a mut dyn TtsEngine,
}

#[derive(Debug)]
enum Pending {
    InputChunk {
        chunk: u32,
    },
    Hypothesis(PartialHypothesis),
    EvalDone {
        decision: CommitDecision,
        is_final: bool,
    },
    ConnectiveText(String),
    LargeToken(String),
    LargeDone,
    TtsReady {
        stream: StreamId,
        chunk: SynthChunk,
    },
}

struct Queue {
    heap: BinaryHeap<Reverse<(u64, u64)>>,
    items: HashMap<u64, Pending>,
    seq: u64,
}

impl Queue {
    fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            items: HashMap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, t_ms: u64, item: Pending) {
        self.heap.push(Reverse((t_ms, self.seq)));
        self.items.insert(self.seq, item);
        self.seq += 1;
    }

    fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse((t, _))| *t)
    }

    fn pop(&mut self) -> Option<(u64, Pending)> {
        let Reverse((t, seq)) = self.heap.pop()?;
        Some((t, self.items.remove(&seq).expect("queued item")))
    }

    fn clear(&mut self) {
        self.heap.clear();
        self.items.clear();
    }
}

struct Engine<'a, 'c> {
    strategy: Strategy,
    policy: &'a PolicyConfig,
    timing: &'a SmallTiming,
    comps: SessionComponents<'c>,
    queue: Queue,
    events: Vec<TraceEvent>,
    input_end_ms: u64,
    small_busy_until: u64,
    last_eval_ms: Option<u64>,
    latch: CommitLatch,
    settled_ms: Option<u64>,
    unit: Vec<String>,
    first_token_seen: bool,
    connective_chunks: Vec<SynthChunk>,
    main_chunks: Vec<SynthChunk>,
    live: Option<Receiver<LiveEvent>>,
    failed: bool,
}

/// Runs one dialogue turn.
///
/// Component failures end the trace with an `error` event; this never panics
/// on bad component behavior.
#[allow(clippy::too_many_arguments)]
pub fn run_session(
    session: &str,
    input_audio_ms: u64,
    input_chunk_times: &[u64],
    strategy: Strategy,
    comps: SessionComponents<'_>,
    policy: &PolicyConfig,
    timing: &SmallTiming,
    clock: Clock,
) -> SessionTrace {
    let mut engine = Engine {
        strategy,
        policy,
        timing,
        comps,
        queue: Queue::new(),
        events: Vec::new(),
        input_end_ms: input_chunk_times.last().copied().unwrap_or(0),
        small_busy_until: 0,
        last_eval_ms: None,
        latch: CommitLatch::new(),
        settled_ms: match strategy {
            Strategy::Ssc => Some(0),
            _ => None,
        },
        unit: Vec::new(),
        first_token_seen: false,
        connective_chunks: Vec::new(),
        main_chunks: Vec::new(),
        live: None,
        failed: false,
    };
    for (i, &t) in input_chunk_times.iter().enumerate() {
        engine.queue.push(
            t,
            Pending::InputChunk {
                chunk: i as u32 + 1,
            },
        );
    }
    for h in engine.comps.asr.hypotheses() {
        engine
            .queue
            .push(h.t_ms, Pending::Hypothesis(h.hyp.clone()));
    }
    match clock {
        Clock::Virtual => engine.run_virtual(input_audio_ms),
        Clock::Realtime => engine.run_realtime(input_audio_ms),
    }
    if !engine.failed {
        engine.playback();
    }
    // playback events are computed after the loop; merge them into place
    engine.events.sort_by_key(|e| e.t_ms);
    SessionTrace {
        session: session.to_string(),
        strategy,
        input_audio_ms,
        events: engine.events,
    }
}

impl Engine<'_, '_> {
    fn run_virtual(&mut self, input_audio_ms: u64) {
        while let Some((t, item)) = self.queue.pop() {
            self.handle(t, item, input_audio_ms, None);
            if self.failed {
                return;
            }
        }
    }

    fn run_realtime(&mut self, input_audio_ms: u64) {
        let start = Instant::now();
        let now_ms = |at: Instant| at.saturating_duration_since(start).as_millis() as u64;
        let mut current = 0u64;
        loop {
            let next = self.queue.peek_time();
            if let Some(rx) = &self.live {
                let received = match next {
                    Some(t) => {
                        let wait = (start + Duration::from_millis(t))
                            .saturating_duration_since(Instant::now());
                        rx.recv_timeout(wait)
                    }
                    None => rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
                };
                match received {
                    Ok(LiveEvent::Token { text, at }) => {
                        let t = now_ms(at).max(current);
                        self.queue.push(t, Pending::LargeToken(text));
                        continue;
                    }
                    Ok(LiveEvent::Done) => {
                        self.live = None;
                        let t = now_ms(Instant::now()).max(current);
                        self.queue.push(t, Pending::LargeDone);
                        continue;
                    }
                    Ok(LiveEvent::Failed(e)) => {
                        self.fail(now_ms(Instant::now()).max(current), "large", e.to_string());
                        return;
                    }
                    Err(RecvTimeoutError::Disconnected) => {
                        self.fail(
                            now_ms(Instant::now()).max(current),
                            "large",
                            "token stream closed without completion".into(),
                        );
                        return;
                    }
                    Err(RecvTimeoutError::Timeout) => {}
                }
            } else if let Some(t) = next {
                let due = start + Duration::from_millis(t);
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                }
            }
            let Some((t, item)) = self.queue.pop() else {
                if self.live.is_none() {
                    return;
                }
                continue;
            };
            current = current.max(t);
            self.handle(current, item, input_audio_ms, Some(()));
            if self.failed {
                return;
            }
        }
    }

    fn emit(&mut self, t_ms: u64, kind: EventKind) {
        self.events.push(TraceEvent { t_ms, kind });
    }

    fn fail(&mut self, t_ms: u64, component: &str, message: String) {
        self.emit(
            t_ms,
            EventKind::Error {
                component: component.to_string(),
                message,
            },
        );
        self.queue.clear();
        self.live = None;
        self.failed = true;
    }

    fn handle(&mut self, t: u64, item: Pending, input_audio_ms: u64, realtime: Option<()>) {
        match item {
            Pending::InputChunk { chunk } => self.emit(
                t,
                EventKind::InputChunkSent {
                    chunk,
                    input_audio_ms,
                },
            ),
            Pending::Hypothesis(hyp) if !hyp.is_final => {
                self.emit(
                    t,
                    EventKind::AsrPartial {
                        step: hyp.step,
                        text: hyp.text.clone(),
                    },
                );
                if self.strategy == Strategy::Ddtsr && !hyp.text.trim().is_empty() {
                    self.schedule_eval(t, hyp);
                }
            }
            Pending::Hypothesis(hyp) => {
                self.emit(
                    t,
                    EventKind::AsrFinal {
                        step: hyp.step,
                        text: hyp.text.clone(),
                    },
                );
                self.invoke_large(t, &hyp.text, realtime.is_some());
                if self.failed {
                    return;
                }
                match self.strategy {
                    Strategy::Ssc => {}
                    Strategy::Sdc | Strategy::Ddtsr => {
                        if self.latch.is_committed() {
                            self.settled_ms.get_or_insert(t);
                        } else {
                            self.schedule_eval(t, hyp);
                        }
                    }
                }
            }
            Pending::EvalDone { decision, is_final } => {
                if self.latch.is_committed() {
                    // a commit already landed; later evaluations are discarded
                    return;
                }
                self.emit(
                    t,
                    EventKind::SmallEval {
                        step: decision.step,
                        conf: decision.conf,
                        sig: decision.sig,
                    },
                );
                if self.latch.offer(&decision) {
                    let text = decision
                        .chosen
                        .as_ref()
                        .map(|c| c.text())
                        .unwrap_or_default();
                    self.emit(
                        t,
                        EventKind::Commit {
                            step: decision.step,
                            conf: decision.conf,
                            connective: text.clone(),
                        },
                    );
                    self.settled_ms.get_or_insert(t);
                    self.queue
                        .push(t + self.timing.decode_ms, Pending::ConnectiveText(text));
                } else if is_final {
                    self.settled_ms.get_or_insert(t);
                }
            }
            Pending::ConnectiveText(text) => {
                self.emit(t, EventKind::ConnectiveText { text: text.clone() });
                for chunk in self.comps.connective_tts.submit(&text, t) {
                    let ready = chunk.ready_ms.max(t);
                    self.queue.push(
                        ready,
                        Pending::TtsReady {
                            stream: StreamId::Connective,
                            chunk,
                        },
                    );
                }
            }
            Pending::LargeToken(token) => {
                if !self.first_token_seen {
                    self.first_token_seen = true;
                    self.emit(
                        t,
                        EventKind::LargeFirstToken {
                            token: token.clone(),
                        },
                    );
                }
                let ends_sentence = token.ends_with(['.', '!', '?']);
                self.unit.push(token);
                if ends_sentence || self.unit.len() >= UNIT_MAX_TOKENS {
                    self.flush_unit(t);
                }
            }
            Pending::LargeDone => self.flush_unit(t),
            Pending::TtsReady { stream, chunk } => {
                self.emit(
                    t,
                    EventKind::TtsChunkReady {
                        stream,
                        duration_ms: chunk.duration_ms,
                        text: chunk.text_covered.clone(),
                    },
                );
                match stream {
                    StreamId::Connective => self.connective_chunks.push(chunk),
                    StreamId::Main => self.main_chunks.push(chunk),
                }
            }
        }
    }

    fn schedule_eval(&mut self, t: u64, hyp: PartialHypothesis) {
        if !hyp.is_final && self.timing.step_ms > 0 {
            if let Some(last) = self.last_eval_ms {
                if t < last + self.timing.step_ms {
                    return;
                }
            }
        }
        self.last_eval_ms = Some(t);
        let start = t.max(self.small_busy_until);
        let done = start + self.timing.eval_ms;
        self.small_busy_until = done;
        let decision = evaluate_step(self.comps.small, &hyp, self.policy);
        self.queue.push(
            done,
            Pending::EvalDone {
                decision,
                is_final: hyp.is_final,
            },
        );
    }

    fn invoke_large(&mut self, t: u64, transcript: &str, realtime: bool) {
        self.emit(
            t,
            EventKind::LargeInvoked {
                transcript: transcript.to_string(),
            },
        );
        match self.comps.large.invoke(transcript, t) {
            Ok(TokenFeed::Scheduled(tokens)) => {
                let end = tokens.last().map_or(t, |tok| tok.t_ms.max(t));
                for tok in tokens {
                    self.queue
                        .push(tok.t_ms.max(t), Pending::LargeToken(tok.text));
                }
                self.queue.push(end, Pending::LargeDone);
            }
            Ok(TokenFeed::Live(rx)) if realtime => self.live = Some(rx),
            Ok(TokenFeed::Live(_)) => self.fail(
                t,
                "large",
                "live token stream requires the realtime clock".into(),
            ),
            Err(e) => self.fail(t, "large", e.to_string()),
        }
    }

    fn flush_unit(&mut self, t: u64) {
        if self.unit.is_empty() {
            return;
        }
        let text = join_tokens(&std::mem::take(&mut self.unit));
        for chunk in self.comps.main_tts.submit(&text, t) {
            let ready = chunk.ready_ms.max(t);
            self.queue.push(
                ready,
                Pending::TtsReady {
                    stream: StreamId::Main,
                    chunk,
                },
            );
        }
    }

    /// Places both streams on the output timeline. The connective never plays
    /// over the user; the main stream waits until the connective track is
    /// decided and then follows it.
    fn playback(&mut self) {
        let conn = layout_stream(
            StreamId::Connective,
            &self.connective_chunks,
            self.input_end_ms,
        );
        let main_gate = self.input_end_ms.max(self.settled_ms.unwrap_or(0));
        let main = layout_stream(StreamId::Main, &self.main_chunks, main_gate);
        let merged = match concat_streams(&conn, &main) {
            Ok(m) => m,
            Err(e) => {
                let t = self.events.last().map_or(0, |e| e.t_ms);
                self.fail(t, "playback", e.to_string());
                return;
            }
        };
        if let (Some(c), Some(m)) = (
            merged
                .iter()
                .rev()
                .find(|c| c.stream_id == StreamId::Connective),
            merged.iter().find(|c| c.stream_id == StreamId::Main),
        ) {
            let gap = m.play_start_ms.saturating_sub(c.play_end_ms());
            self.emit(m.play_start_ms, EventKind::Handoff { gap_ms: gap });
        }
        for c in merged {
            self.emit(
                c.play_start_ms,
                EventKind::AudioPlayStart {
                    stream: c.stream_id,
                    duration_ms: c.duration_ms,
                    text: c.text_covered.clone(),
                },
            );
            self.emit(
                c.play_end_ms(),
                EventKind::AudioPlayEnd {
                    stream: c.stream_id,
                },
            );
        }
    }
}

/// Joins word tokens with spaces, attaching pure punctuation to the left.
pub fn join_tokens(tokens: &[String]) -> String {
    let mut out = String::new();
    for t in tokens {
        let punct = !t.is_empty() && t.chars().all(|c| c.is_ascii_punctuation());
        if !out.is_empty() && !punct {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}
