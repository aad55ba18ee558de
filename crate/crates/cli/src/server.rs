//! `mock serve`: the mock script behind an OpenAI-style HTTP endpoint.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use ipelicit_elicit::scripted::word_count;
use ipelicit_elicit::{ChatRequest, ChatResponse, Usage};
use tiny_http::{Header, Method, Response, Server};

use crate::mock::MockScript;
use crate::CliError;

pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

const WORKERS: usize = 4;

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and serves on a background thread.
    pub fn start(script: MockScript, addr: &str) -> Result<Self, CliError> {
        let server = Server::http(addr).map_err(|e| CliError::Config(format!("cannot bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| CliError::Config("mock server bound a non-IP socket".into()))?;
        let server = Arc::new(server);
        let script = Arc::new(script);
        let workers = (0..WORKERS)
            .map(|_| {
                let server = Arc::clone(&server);
                let script = Arc::clone(&script);
                std::thread::spawn(move || {
                    for request in server.incoming_requests() {
                        handle(&script, request);
                    }
                })
            })
            .collect();
        Ok(MockServer { server, addr, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to put in an endpoint config.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Blocks until the server is shut down from elsewhere.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_header() -> Header {
    Header::from_bytes("Content-Type", "application/json").expect("static header")
}

fn error_body(message: &str) -> String {
    serde_json::json!({"error": {"message": message}}).to_string()
}

fn handle(script: &MockScript, mut request: tiny_http::Request) {
    let mut body = String::new();
    let outcome = if *request.method() != Method::Post {
        Err((405, "POST only".to_string()))
    } else if let Err(e) = request.as_reader().read_to_string(&mut body) {
        Err((400, format!("cannot read body: {e}")))
    } else {
        serde_json::from_str::<serde_json::Value>(&body)
            .ok()
            .and_then(|v| ChatRequest::from_body(&v))
            .ok_or((400, "body is not a chat request".to_string()))
            .and_then(|chat| {
                // unmatched or exhausted scripts are client errors, not retryable
                let text = script.reply(&chat).map_err(|m| (422, m))?;
                let usage = Usage {
                    input_tokens: word_count(&chat.system) + word_count(&chat.user),
                    output_tokens: word_count(&text),
                };
                Ok(ChatResponse::body_for(&text, &chat.model, usage).to_string())
            })
    };
    let response = match outcome {
        Ok(b) => Response::from_string(b).with_header(json_header()),
        Err((status, msg)) => {
            log::warn!("mock serve: {status} {msg}");
            Response::from_string(error_body(&msg))
                .with_status_code(status)
                .with_header(json_header())
        }
    };
    if let Err(e) = request.respond(response) {
        log::warn!("mock serve: failed to respond: {e}");
    }
}
