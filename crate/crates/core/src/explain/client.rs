//! Chat-completion clients: a real HTTP client speaking the
//! OpenAI-compatible wire format and a scripted client for offline tests.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use super::{ExplainError, ExplainerConfig, Result};

/// One chat message in the request payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

/// Anything that can answer a chat request with raw text.
pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], cfg: &ExplainerConfig) -> Result<String>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Blocking HTTP client for OpenAI-compatible chat-completions endpoints.
pub struct HttpChatClient;

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage], cfg: &ExplainerConfig) -> Result<String> {
        let token = match &cfg.auth_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| ExplainError::Auth(var.clone()))?)
            }
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ExplainError::Config(e.to_string()))?;
        let body = ChatRequest {
            model: &cfg.model,
            messages,
            temperature: cfg.temperature,
            max_tokens: cfg.max_output_tokens,
        };

        let attempts = cfg.max_retries + 1;
        let mut last = String::from("no response");
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    250u64.saturating_mul(1 << (attempt - 1).min(5)),
                ));
            }
            let mut req = client.post(&cfg.endpoint).json(&body);
            if let Some(t) = &token {
                req = req.bearer_auth(t);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp
                            .json()
                            .map_err(|e| ExplainError::BadResponse(e.to_string()))?;
                        return parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| {
                                ExplainError::BadResponse("response had no choices".into())
                            });
                    }
                    last = format!("{status}: {}", resp.text().unwrap_or_default());
                    if status.is_client_error() && status.as_u16() != 429 {
                        break;
                    }
                }
                Err(e) => last = format!("transport error: {e}"),
            }
        }
        Err(ExplainError::Transport { attempts, last })
    }
}

/// Deterministic offline client: replays canned responses in order.
pub struct ScriptedClient {
    responses: Mutex<VecDeque<String>>,
}

#[derive(Deserialize)]
struct ScriptFile {
    responses: Vec<String>,
}

impl ScriptedClient {
    pub fn new(responses: Vec<String>) -> ScriptedClient {
        ScriptedClient { responses: Mutex::new(responses.into()) }
    }

    /// Load a `{"responses": ["...", ...]}` fixture file.
    pub fn from_file(path: &Path) -> Result<ScriptedClient> {
        let raw = std::fs::read_to_string(path)?;
        let script: ScriptFile = serde_json::from_str(&raw)
            .map_err(|e| ExplainError::Config(format!("bad script file: {e}")))?;
        Ok(ScriptedClient::new(script.responses))
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().unwrap().len()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, _messages: &[ChatMessage], _cfg: &ExplainerConfig) -> Result<String> {
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| ExplainError::Transport {
                attempts: 1,
                last: "scripted client exhausted".into(),
            })
    }
}
