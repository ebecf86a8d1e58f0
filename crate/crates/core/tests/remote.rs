use dualtrack_core::components::{
    LargeModel, LiveEvent, Reference, RemoteError, RemoteLargeModel, Scenario, ScenarioChunk,
    SmallScript, TokenFeed,
};
use dualtrack_core::config::TimingConfig;
use dualtrack_core::orchestrator::{run_batch, BatchOptions, Clock, StandardFactory, Strategy};
use dualtrack_core::policy::PolicyConfig;
use dualtrack_core::stub::{StubBehavior, StubServer};

#[test]
fn tokens_arrive_in_order() {
    let server = StubServer::fixed(StubBehavior::tokens(
        ["Sure", ",", " here", " it", " is."],
        5,
    ))
    .unwrap();
    let client = RemoteLargeModel::new(server.url(), 2000);
    let tokens = client.collect("hi").unwrap();
    let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    assert_eq!(texts, ["Sure", ",", " here", " it", " is."]);
    assert!(tokens.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
    assert_eq!(client.complete("hi").unwrap(), "Sure, here it is.");
}

#[test]
fn prompt_reaches_the_handler() {
    let server = StubServer::start(|p| StubBehavior::tokens([p.to_uppercase()], 0)).unwrap();
    let client = RemoteLargeModel::new(server.url(), 2000);
    assert_eq!(client.complete("echo me").unwrap(), "ECHO ME");
}

#[test]
fn stalled_server_times_out() {
    let server = StubServer::fixed(StubBehavior::Stall { ms: 1500 }).unwrap();
    let client = RemoteLargeModel::new(server.url(), 200);
    let started = std::time::Instant::now();
    assert_eq!(client.complete("hi"), Err(RemoteError::Timeout(200)));
    assert!(started.elapsed().as_millis() < 1400);
}

#[test]
fn malformed_line_reports_its_number() {
    let body = "{\"token\":\"a\"}\n\n{\"token\": 3}\n".to_string();
    let server = StubServer::fixed(StubBehavior::Raw(body)).unwrap();
    let client = RemoteLargeModel::new(server.url(), 2000);
    match client.complete("hi") {
        Err(RemoteError::Protocol { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected protocol error, got {other:?}"),
    }
}

#[test]
fn error_status_is_surfaced() {
    let server = StubServer::fixed(StubBehavior::Status(503)).unwrap();
    let client = RemoteLargeModel::new(server.url(), 2000);
    assert_eq!(client.complete("hi"), Err(RemoteError::Status(503)));
}

#[test]
fn unreachable_endpoint_is_a_connect_error() {
    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let client = RemoteLargeModel::new(format!("http://{addr}/generate"), 500);
    assert!(matches!(
        client.complete("hi"),
        Err(RemoteError::Connect { .. })
    ));
}

#[test]
fn live_feed_ends_with_done() {
    let server = StubServer::fixed(StubBehavior::tokens(["a", "b"], 0)).unwrap();
    let client = RemoteLargeModel::new(server.url(), 2000);
    let TokenFeed::Live(rx) = client.invoke("x", 0).unwrap() else {
        panic!("expected a live feed")
    };
    let events: Vec<LiveEvent> = rx.iter().collect();
    assert_eq!(events.len(), 3);
    assert!(matches!(events[2], LiveEvent::Done));
}

fn short_scenario() -> Scenario {
    Scenario {
        id: "rt".into(),
        input_audio_ms: 1000,
        chunks: vec![
            ScenarioChunk {
                end_ms: 500,
                partial: "what time".into(),
            },
            ScenarioChunk {
                end_ms: 1000,
                partial: "what time is it".into(),
            },
        ],
        final_transcript: "What time is it?".into(),
        reference: Some(Reference {
            connective: "Well,".into(),
            response: "It is noon.".into(),
        }),
        timing: None,
        small: Some(SmallScript {
            connective: "Well,".into(),
            confidence: vec![0.1, 0.9, 0.9],
        }),
    }
}

#[test]
fn realtime_ddtsr_session_against_stub() {
    let server = StubServer::fixed(StubBehavior::tokens(["It", "is", "noon."], 30)).unwrap();
    let factory = StandardFactory::new(2.0).with_remote(RemoteLargeModel::new(server.url(), 3000));
    let mut timing = TimingConfig::default();
    timing.asr.final_tail_ms = 200;
    let opts = BatchOptions {
        strategy: Strategy::Ddtsr,
        policy: PolicyConfig::default(),
        timing,
        seed: 1,
        clock: Clock::Realtime,
        jobs: 1,
    };
    let trace = run_batch(&[short_scenario()], &factory, &opts)
        .pop()
        .unwrap();
    assert!(!trace.is_error(), "{:?}", trace.error());
    trace.validate().unwrap();
    assert!(trace.connective_emitted());
    assert_eq!(trace.count("large_first_token"), 1);
    let first_audio = trace.first("audio_play_start").unwrap();
    assert!(first_audio >= 1000);
    assert!(trace.first("large_first_token").unwrap() >= trace.first("large_invoked").unwrap());
}
