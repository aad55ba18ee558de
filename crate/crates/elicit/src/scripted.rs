//! In-memory endpoints for tests and offline runs.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::endpoint::{ChatEndpoint, ChatRequest, ChatResponse, TransportError, Usage};

/// Whitespace-separated word count, the mock token estimate.
pub fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Replies from a fixed queue, one per request; running out is an error.
pub struct ScriptedEndpoint {
    id: String,
    replies: Mutex<VecDeque<String>>,
    calls: AtomicUsize,
    supports_seed: bool,
}

impl ScriptedEndpoint {
    pub fn new<I, S>(id: &str, replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedEndpoint {
            id: id.to_string(),
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            calls: AtomicUsize::new(0),
            supports_seed: true,
        }
    }

    pub fn without_seed_support(mut self) -> Self {
        self.supports_seed = false;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatEndpoint for ScriptedEndpoint {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports_seed(&self) -> bool {
        self.supports_seed
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = self
            .replies
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| TransportError::Script(format!("{}: script exhausted", self.id)))?;
        Ok(respond(request, &text))
    }
}

/// Wraps `text` as a complete response to `request` with word-count usage.
pub fn respond(request: &ChatRequest, text: &str) -> ChatResponse {
    let usage = Usage {
        input_tokens: word_count(&request.system) + word_count(&request.user),
        output_tokens: word_count(text),
    };
    ChatResponse {
        text: text.to_string(),
        usage,
        raw_request: request.to_body().to_string(),
        raw_response: ChatResponse::body_for(text, &request.model, usage).to_string(),
    }
}
