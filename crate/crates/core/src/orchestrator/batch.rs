use std::sync::Arc;

use rayon::prelude::*;

use super::engine::{run_session, SessionComponents};
use super::trace::{EventKind, SessionTrace, TraceEvent};
use super::{Clock, Strategy};
use crate::components::{
    scripted_asr_stream, scripted_large_model, ComponentError, LargeModel, RemoteLargeModel,
    Scenario, ScriptedSmallModel, SimulatedTts, SmallModel, TabularSmallModel, TtsEngine,
};
use crate::config::{SessionTiming, TimingConfig};
use crate::math::{tokenize, DialogueSample};
use crate::policy::PolicyConfig;

/// Builds the per-session components of a batch.
pub trait ComponentFactory: Sync {
    fn small(&self, scenario: &Scenario) -> Result<Arc<dyn SmallModel>, ComponentError>;
    fn large(
        &self,
        scenario: &Scenario,
        timing: &SessionTiming,
    ) -> Result<Box<dyn LargeModel>, ComponentError>;

    fn tts(&self, timing: &SessionTiming) -> Result<Box<dyn TtsEngine>, ComponentError> {
        let t = &timing.tts;
        Ok(Box::new(SimulatedTts::new(
            t.first_chunk_ms,
            t.ms_audio_per_ms_synth,
            t.chunk_duration_ms,
            t.ms_per_char,
        )?))
    }
}

/// Scenario-scripted small model when the scenario carries a script, a shared
/// model otherwise; scripted large model answering with the scenario's
/// reference response, or a remote endpoint.
pub struct StandardFactory {
    shared_small: Option<Arc<dyn SmallModel>>,
    h_max: f64,
    remote: Option<RemoteLargeModel>,
}

impl StandardFactory {
    pub fn new(h_max: f64) -> Self {
        Self {
            shared_small: None,
            h_max,
            remote: None,
        }
    }

    pub fn with_small(mut self, small: Arc<dyn SmallModel>) -> Self {
        self.shared_small = Some(small);
        self
    }

    pub fn with_remote(mut self, remote: RemoteLargeModel) -> Self {
        self.remote = Some(remote);
        self
    }

    /// Shared tabular small model learned from the scenarios' reference
    /// connectives; `None` when no scenario has one.
    pub fn tabular_from_scenarios(scenarios: &[Scenario]) -> Option<TabularSmallModel> {
        let samples: Vec<DialogueSample> = scenarios
            .iter()
            .filter_map(|s| {
                let r = s.reference.as_ref()?;
                if r.connective.trim().is_empty() {
                    return None;
                }
                Some(DialogueSample::new(
                    s.id.clone(),
                    &s.final_transcript,
                    &r.connective,
                    &r.response,
                ))
            })
            .collect();
        TabularSmallModel::from_samples(&samples)
    }
}

impl ComponentFactory for StandardFactory {
    fn small(&self, scenario: &Scenario) -> Result<Arc<dyn SmallModel>, ComponentError> {
        if let Some(m) = ScriptedSmallModel::from_script(scenario, self.h_max)? {
            return Ok(Arc::new(m));
        }
        self.shared_small.clone().ok_or_else(|| {
            ComponentError::Config(format!(
                "scenario {:?} has no small-model script and no shared small model is configured",
                scenario.id
            ))
        })
    }

    fn large(
        &self,
        scenario: &Scenario,
        timing: &SessionTiming,
    ) -> Result<Box<dyn LargeModel>, ComponentError> {
        if let Some(r) = &self.remote {
            return Ok(Box::new(r.clone()));
        }
        let response = scenario
            .reference
            .as_ref()
            .map(|r| tokenize(&r.response))
            .unwrap_or_default();
        Ok(Box::new(scripted_large_model(
            timing.first_token_ms,
            timing.per_token_ms,
            [(scenario.final_transcript.clone(), response)],
        )?))
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub strategy: Strategy,
    pub policy: PolicyConfig,
    pub timing: TimingConfig,
    pub seed: u64,
    pub clock: Clock,
    /// Sessions run concurrently; 0 or 1 runs them one after another.
    pub jobs: usize,
}

/// Runs one scenario of a batch; `index` selects its timing draw.
pub fn run_scenario(
    scenario: &Scenario,
    index: usize,
    factory: &dyn ComponentFactory,
    opts: &BatchOptions,
) -> SessionTrace {
    match build_and_run(scenario, index, factory, opts) {
        Ok(trace) => trace,
        Err(e) => SessionTrace {
            session: scenario.id.clone(),
            strategy: opts.strategy,
            input_audio_ms: scenario.input_audio_ms,
            events: vec![TraceEvent {
                t_ms: 0,
                kind: EventKind::Error {
                    component: "setup".into(),
                    message: e.to_string(),
                },
            }],
        },
    }
}

fn build_and_run(
    scenario: &Scenario,
    index: usize,
    factory: &dyn ComponentFactory,
    opts: &BatchOptions,
) -> Result<SessionTrace, ComponentError> {
    scenario.validate()?;
    let timing = opts.timing.for_session(scenario, opts.seed, index);
    let asr = scripted_asr_stream(scenario, timing.final_tail_ms)?;
    let small = factory.small(scenario)?;
    let large = factory.large(scenario, &timing)?;
    let mut conn_tts = factory.tts(&timing)?;
    let mut main_tts = factory.tts(&timing)?;
    let comps = SessionComponents {
        asr: &asr,
        small: small.as_ref(),
        large: large.as_ref(),
        connective_tts: conn_tts.as_mut(),
        main_tts: main_tts.as_mut(),
    };
    Ok(run_session(
        &scenario.id,
        scenario.input_audio_ms,
        &scenario.input_chunk_times(),
        opts.strategy,
        comps,
        &opts.policy,
        &timing.small,
        opts.clock,
    ))
}

/// Runs every scenario independently. Output order follows input order; a
/// failing session yields an error-terminated trace and the batch continues.
pub fn run_batch(
    scenarios: &[Scenario],
    factory: &dyn ComponentFactory,
    opts: &BatchOptions,
) -> Vec<SessionTrace> {
    let run = |(i, s): (usize, &Scenario)| run_scenario(s, i, factory, opts);
    if opts.jobs <= 1 {
        return scenarios.iter().enumerate().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
    {
        Ok(pool) => pool.install(|| scenarios.par_iter().enumerate().map(run).collect()),
        Err(_) => scenarios.iter().enumerate().map(run).collect(),
    }
}
