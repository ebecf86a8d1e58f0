//! Streaming client for a remotely served large model.
//!
//! Wire protocol: `POST <endpoint>` with body `{"prompt": ..., "stream": true}`;
//! the response body is newline-delimited JSON, one `{"token": "..."}` object
//! per line, terminated by end of stream. Blank lines are ignored.

use std::io::{BufRead, BufReader};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ComponentError, LargeModel, LiveEvent, ResponseToken, TokenFeed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("cannot reach {endpoint}: {reason}")]
    Connect { endpoint: String, reason: String },
    #[error("no response within {0} ms")]
    Timeout(u64),
    #[error("server returned status {0}")]
    Status(u16),
    #[error("malformed event on line {line}: {reason}")]
    Protocol { line: usize, reason: String },
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
    stream: bool,
}

#[derive(Deserialize)]
struct Event {
    token: String,
}

#[derive(Debug, Clone)]
pub struct RemoteLargeModel {
    endpoint: String,
    timeout_ms: u64,
    body_timeout_ms: u64,
}

impl RemoteLargeModel {
    /// `timeout_ms` bounds connecting and waiting for the response head.
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_ms,
            body_timeout_ms: 60_000,
        }
    }

    /// Upper bound on the whole streamed body.
    pub fn with_body_timeout_ms(mut self, ms: u64) -> Self {
        self.body_timeout_ms = ms;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Streams tokens for `prompt`, calling `on_token` as each line arrives.
    pub fn stream(
        &self,
        prompt: &str,
        mut on_token: impl FnMut(String),
    ) -> Result<(), RemoteError> {
        let timeout = Some(Duration::from_millis(self.timeout_ms));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_connect(timeout)
            .timeout_send_request(timeout)
            .timeout_recv_response(timeout)
            .timeout_recv_body(Some(Duration::from_millis(self.body_timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let body = serde_json::to_string(&Request {
            prompt,
            stream: true,
        })
        .expect("serializable request");
        let resp = agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .header("accept", "application/x-ndjson")
            .send(body.as_str())
            .map_err(|e| self.map_error(e))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(RemoteError::Status(status));
        }
        let reader = BufReader::new(resp.into_body().into_reader());
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| self.map_io(e))?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: Event = serde_json::from_str(&line).map_err(|e| RemoteError::Protocol {
                line: i + 1,
                reason: e.to_string(),
            })?;
            on_token(ev.token);
        }
        Ok(())
    }

    /// Collects the full response, stamping each token with milliseconds since
    /// the request was issued.
    pub fn collect(&self, prompt: &str) -> Result<Vec<ResponseToken>, RemoteError> {
        let start = Instant::now();
        let mut out = Vec::new();
        self.stream(prompt, |text| {
            out.push(ResponseToken {
                text,
                t_ms: start.elapsed().as_millis() as u64,
            })
        })?;
        Ok(out)
    }

    /// Concatenated response text.
    pub fn complete(&self, prompt: &str) -> Result<String, RemoteError> {
        let mut s = String::new();
        self.stream(prompt, |t| s.push_str(&t))?;
        Ok(s)
    }

    fn map_error(&self, e: ureq::Error) -> RemoteError {
        match e {
            ureq::Error::Timeout(_) => RemoteError::Timeout(self.timeout_ms),
            ureq::Error::StatusCode(c) => RemoteError::Status(c),
            ureq::Error::Io(io) => self.map_io(io),
            ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => RemoteError::Connect {
                endpoint: self.endpoint.clone(),
                reason: e.to_string(),
            },
            other => RemoteError::Transport(other.to_string()),
        }
    }

    fn map_io(&self, e: std::io::Error) -> RemoteError {
        use std::io::ErrorKind::*;
        match e.kind() {
            TimedOut | WouldBlock => RemoteError::Timeout(self.timeout_ms),
            ConnectionRefused => RemoteError::Connect {
                endpoint: self.endpoint.clone(),
                reason: e.to_string(),
            },
            _ => {
                // ureq wraps its own timeouts in io errors while reading the body
                if let Some(inner) = e.get_ref().and_then(|r| r.downcast_ref::<ureq::Error>()) {
                    if matches!(inner, ureq::Error::Timeout(_)) {
                        return RemoteError::Timeout(self.timeout_ms);
                    }
                }
                RemoteError::Transport(e.to_string())
            }
        }
    }
}

impl LargeModel for RemoteLargeModel {
    /// Runs the request on its own thread; tokens are stamped on receipt.
    fn invoke(&self, transcript: &str, _t0_ms: u64) -> Result<TokenFeed, ComponentError> {
        let (tx, rx) = mpsc::channel();
        let client = self.clone();
        let prompt = transcript.to_string();
        std::thread::Builder::new()
            .name("remote-llm".into())
            .spawn(move || {
                let res = client.stream(&prompt, |text| {
                    let _ = tx.send(LiveEvent::Token {
                        text,
                        at: Instant::now(),
                    });
                });
                let _ = tx.send(match res {
                    Ok(()) => LiveEvent::Done,
                    Err(e) => LiveEvent::Failed(e.into()),
                });
            })
            .map_err(|e| ComponentError::Failed(format!("spawn remote client: {e}")))?;
        Ok(TokenFeed::Live(rx))
    }
}
