//! Minimal local server speaking the remote model's streaming protocol, for
//! tests and offline demos.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

/// What the server does with one request.
#[derive(Debug, Clone, PartialEq)]
pub enum StubBehavior {
    /// Streams one `{"token": ...}` line per token, `delay_ms` before each.
    Tokens { tokens: Vec<String>, delay_ms: u64 },
    /// Waits before sending anything, then answers with an empty stream.
    Stall { ms: u64 },
    /// Sends `body` verbatim with status 200.
    Raw(String),
    /// Answers with this status and an empty body.
    Status(u16),
}

impl StubBehavior {
    pub fn tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>, delay_ms: u64) -> Self {
        StubBehavior::Tokens {
            tokens: tokens.into_iter().map(Into::into).collect(),
            delay_ms,
        }
    }
}

type Handler = dyn Fn(&str) -> StubBehavior + Send + Sync;

/// Background server on an ephemeral localhost port; stops on drop.
pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Answers every request the same way.
    pub fn fixed(behavior: StubBehavior) -> std::io::Result<Self> {
        Self::start(move |_| behavior.clone())
    }

    /// Chooses the behavior from the request's prompt.
    pub fn start(
        handler: impl Fn(&str) -> StubBehavior + Send + Sync + 'static,
    ) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", handler)
    }

    pub fn bind(
        addr: &str,
        handler: impl Fn(&str) -> StubBehavior + Send + Sync + 'static,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let flag = stop.clone();
        let thread = std::thread::Builder::new()
            .name("stub-server".into())
            .spawn(move || {
                for conn in listener.incoming() {
                    if flag.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let h = handler.clone();
                    std::thread::spawn(move || {
                        if let Err(e) = serve(conn, h.as_ref()) {
                            log::debug!("stub connection: {e}");
                        }
                    });
                }
            })?;
        Ok(Self {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Endpoint URL for the remote client.
    pub fn url(&self) -> String {
        format!("http://{}/generate", self.addr)
    }

    /// Blocks until the server is stopped from elsewhere; for command-line use.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(conn: TcpStream, handler: &Handler) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim().is_empty() {
        return Ok(());
    }
    let mut content_length = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let prompt = serde_json::from_slice::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| v.get("prompt").and_then(|p| p.as_str()).map(String::from))
        .unwrap_or_default();

    let mut out = conn;
    let head = |status: u16| {
        format!(
            "HTTP/1.1 {status} {}\r\ncontent-type: application/x-ndjson\r\nconnection: close\r\n\r\n",
            if status == 200 { "OK" } else { "Error" }
        )
    };
    match handler(&prompt) {
        StubBehavior::Tokens { tokens, delay_ms } => {
            out.write_all(head(200).as_bytes())?;
            out.flush()?;
            for t in tokens {
                std::thread::sleep(Duration::from_millis(delay_ms));
                let line = serde_json::json!({ "token": t }).to_string();
                out.write_all(line.as_bytes())?;
                out.write_all(b"\n")?;
                out.flush()?;
            }
        }
        StubBehavior::Stall { ms } => {
            std::thread::sleep(Duration::from_millis(ms));
            out.write_all(head(200).as_bytes())?;
        }
        StubBehavior::Raw(body) => {
            out.write_all(head(200).as_bytes())?;
            out.write_all(body.as_bytes())?;
        }
        StubBehavior::Status(code) => {
            out.write_all(head(code).as_bytes())?;
        }
    }
    out.flush()?;
    out.shutdown(std::net::Shutdown::Both)
}
