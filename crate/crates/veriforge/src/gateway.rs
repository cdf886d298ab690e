//! Uniform conversational interface to text-generation backends.
//!
//! Two backends: an HTTP chat-completions client for real models, and a
//! deterministic scripted backend that replays committed fixtures so
//! every pipeline path can be tested without network access. Both
//! report token usage for cost accounting.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChatMessage, Role, TokenUsage};
use crate::tokenizer::{ApproxTokenizer, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Scripted,
}

/// Backend selection plus the sampling and context parameters shared by
/// every call. Models are configuration, not code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_kind: BackendKind,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    /// Chat-completions endpoint URL. Present iff `http_chat`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_context_tokens")]
    pub max_context_tokens: u64,
    /// Script file (or directory of per-attempt scripts). Present iff `scripted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
    /// Name of the environment variable holding the API key. The value
    /// is read at call time and never written to the run store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Drop oldest non-system turns when the history exceeds the
    /// context budget. Disabled, overflow is an error.
    #[serde(default = "default_true")]
    pub truncate: bool,
    #[serde(default = "default_retry_base_delay_ms")]
    pub retry_base_delay_ms: u64,
}

fn default_model_name() -> String {
    "scripted".to_string()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_context_tokens() -> u64 {
    2048
}
fn default_true() -> bool {
    true
}
fn default_retry_base_delay_ms() -> u64 {
    1000
}

impl BackendConfig {
    pub fn scripted(script_path: impl Into<PathBuf>) -> Self {
        Self {
            backend_kind: BackendKind::Scripted,
            model_name: default_model_name(),
            endpoint: None,
            temperature: default_temperature(),
            max_context_tokens: default_max_context_tokens(),
            script_path: Some(script_path.into()),
            api_key_env: None,
            truncate: true,
            retry_base_delay_ms: default_retry_base_delay_ms(),
        }
    }

    pub fn http_chat(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            backend_kind: BackendKind::HttpChat,
            model_name: model_name.into(),
            endpoint: Some(endpoint.into()),
            temperature: default_temperature(),
            max_context_tokens: default_max_context_tokens(),
            script_path: None,
            api_key_env: None,
            truncate: true,
            retry_base_delay_ms: default_retry_base_delay_ms(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.backend_kind {
            BackendKind::HttpChat => {
                if self.endpoint.is_none() {
                    return Err(GatewayError::Config(
                        "http_chat backend requires an endpoint".into(),
                    ));
                }
                if self.script_path.is_some() {
                    return Err(GatewayError::Config(
                        "script_path is only valid for the scripted backend".into(),
                    ));
                }
            }
            BackendKind::Scripted => {
                if self.script_path.is_none() {
                    return Err(GatewayError::Config(
                        "scripted backend requires a script_path".into(),
                    ));
                }
                if self.endpoint.is_some() {
                    return Err(GatewayError::Config(
                        "endpoint is only valid for the http_chat backend".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolves the script for one benchmark attempt when `script_path`
    /// is a directory. Lookup order: `<design_id>__attempt_<n>.json`,
    /// `<design_id>.json`, `default.json`. A plain file is shared by
    /// every attempt.
    pub fn for_attempt(&self, design_id: &str, attempt: usize) -> Result<Self, GatewayError> {
        let Some(path) = &self.script_path else {
            return Ok(self.clone());
        };
        if !path.is_dir() {
            return Ok(self.clone());
        }
        let candidates = [
            path.join(format!("{design_id}__attempt_{attempt}.json")),
            path.join(format!("{design_id}.json")),
            path.join("default.json"),
        ];
        for candidate in &candidates {
            if candidate.is_file() {
                let mut config = self.clone();
                config.script_path = Some(candidate.clone());
                return Ok(config);
            }
        }
        Err(GatewayError::Script(format!(
            "no script for design {design_id:?} attempt {attempt} under {}",
            path.display()
        )))
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend configuration invalid: {0}")]
    Config(String),
    #[error("conversation history is empty")]
    EmptyHistory,
    #[error("context overflow: history is {tokens} tokens, budget is {max}")]
    ContextOverflow { tokens: u64, max: u64 },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("script error: {0}")]
    Script(String),
    #[error("script exhausted: call {calls} but only {available} responses scripted")]
    ScriptExhausted { calls: usize, available: usize },
}

impl GatewayError {
    /// Transport failures may succeed on retry; everything else is a
    /// configuration or contract problem.
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::Transport { .. })
    }
}

/// One entry of a scripted-backend fixture, consumed in conversation
/// order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub response: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

enum BackendImpl {
    Scripted { entries: Vec<ScriptEntry> },
    Http,
}

/// A configured backend plus the context-budget policy applied before
/// every call. Safe for concurrent use by independent runs; a single
/// conversation is strictly sequential.
pub struct Gateway {
    config: BackendConfig,
    backend: BackendImpl,
    tokenizer: Box<dyn Tokenizer>,
    call_count: std::sync::atomic::AtomicU64,
}

impl Gateway {
    pub fn new(config: BackendConfig) -> Result<Self, GatewayError> {
        Self::with_tokenizer(config, Box::new(ApproxTokenizer))
    }

    pub fn with_tokenizer(
        config: BackendConfig,
        tokenizer: Box<dyn Tokenizer>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend = match config.backend_kind {
            BackendKind::Scripted => {
                let path = config.script_path.as_ref().unwrap();
                BackendImpl::Scripted {
                    entries: load_script(path)?,
                }
            }
            BackendKind::HttpChat => BackendImpl::Http,
        };
        Ok(Self {
            config,
            backend,
            tokenizer,
            call_count: std::sync::atomic::AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Number of complete() calls made through this gateway.
    pub fn calls(&self) -> u64 {
        self.call_count.load(std::sync::atomic::Ordering::SeqCst)
    }

    /// Sends the conversation and returns exactly one assistant message
    /// plus its token usage. Identical (history, scripted config) pairs
    /// return identical output.
    pub fn complete(
        &self,
        history: &[ChatMessage],
    ) -> Result<(ChatMessage, TokenUsage), GatewayError> {
        if history.is_empty() {
            return Err(GatewayError::EmptyHistory);
        }
        self.call_count
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let sent = self.fit_to_context(history)?;
        match &self.backend {
            BackendImpl::Scripted { entries } => {
                // Replay is keyed by conversation position: the n-th
                // assistant turn of the ORIGINAL conversation is entry
                // n, so identical histories get identical responses and
                // a growing conversation consumes the script in order,
                // truncation notwithstanding.
                let index = history.iter().filter(|m| m.role == Role::Assistant).count();
                let entry = entries.get(index).ok_or(GatewayError::ScriptExhausted {
                    calls: index + 1,
                    available: entries.len(),
                })?;
                Ok((
                    ChatMessage::assistant(entry.response.clone()),
                    TokenUsage::new(entry.prompt_tokens, entry.completion_tokens),
                ))
            }
            BackendImpl::Http => self.complete_http(&sent),
        }
    }

    /// Applies the overflow policy: drop oldest non-system messages
    /// first, never the newest message (it carries the diagnostics that
    /// drive repair). Overflow after that, or with truncation disabled,
    /// is an error naming the token counts.
    fn fit_to_context(&self, history: &[ChatMessage]) -> Result<Vec<ChatMessage>, GatewayError> {
        let max = self.config.max_context_tokens;
        let mut kept: Vec<ChatMessage> = history.to_vec();
        let mut tokens = self.tokenizer.count_messages(&kept);
        if tokens <= max {
            return Ok(kept);
        }
        if !self.config.truncate {
            return Err(GatewayError::ContextOverflow { tokens, max });
        }
        while tokens > max {
            let victim = kept
                .iter()
                .enumerate()
                .position(|(i, m)| m.role != Role::System && i != kept.len() - 1);
            match victim {
                Some(i) => kept.remove(i),
                None => return Err(GatewayError::ContextOverflow { tokens, max }),
            };
            tokens = self.tokenizer.count_messages(&kept);
        }
        Ok(kept)
    }

    fn complete_http(
        &self,
        messages: &[ChatMessage],
    ) -> Result<(ChatMessage, TokenUsage), GatewayError> {
        let endpoint = self.config.endpoint.as_ref().unwrap();
        let api_key = match &self.config.api_key_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| GatewayError::MissingApiKey(var.clone()))?)
            }
            None => None,
        };
        let body = serde_json::json!({
            "model": self.config.model_name,
            "messages": messages
                .iter()
                .map(|m| serde_json::json!({"role": role_name(m.role), "content": m.content}))
                .collect::<Vec<_>>(),
            "temperature": self.config.temperature,
            "n": 1,
        });

        const MAX_ATTEMPTS: u32 = 3;
        let mut delay = Duration::from_millis(self.config.retry_base_delay_ms);
        let mut last_error = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            let mut request = ureq::post(endpoint).set("content-type", "application/json");
            if let Some(key) = &api_key {
                request = request.set("authorization", &format!("Bearer {key}"));
            }
            match request.send_json(body.clone()) {
                Ok(response) => {
                    let value: serde_json::Value = response
                        .into_json()
                        .map_err(|e| GatewayError::Protocol(e.to_string()))?;
                    return self.parse_chat_response(&value);
                }
                // 4xx is a request problem and will not improve on retry.
                Err(ureq::Error::Status(code, response)) if (400..500).contains(&code) => {
                    let body = response.into_string().unwrap_or_default();
                    return Err(GatewayError::Protocol(format!(
                        "HTTP {code}: {}",
                        body.chars().take(400).collect::<String>()
                    )));
                }
                Err(e) => {
                    last_error = e.to_string();
                    if attempt < MAX_ATTEMPTS {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(GatewayError::Transport {
            attempts: MAX_ATTEMPTS,
            message: last_error,
        })
    }

    fn parse_chat_response(
        &self,
        value: &serde_json::Value,
    ) -> Result<(ChatMessage, TokenUsage), GatewayError> {
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                GatewayError::Protocol("response missing choices[0].message.content".into())
            })?;
        let usage = match value.get("usage") {
            Some(u) => TokenUsage::new(
                u.get("prompt_tokens").and_then(|v| v.as_u64()).unwrap_or(0),
                u.get("completion_tokens")
                    .and_then(|v| v.as_u64())
                    .unwrap_or_else(|| self.tokenizer.count(content)),
            ),
            None => TokenUsage::new(0, self.tokenizer.count(content)),
        };
        Ok((ChatMessage::assistant(content), usage))
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

fn load_script(path: &Path) -> Result<Vec<ScriptEntry>, GatewayError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))
}
