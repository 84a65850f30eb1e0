//! Chat-completion proposer: prompts, transports, reply parsing.

mod parse;
mod prompt;

pub use crate::synth::correction_loop;
pub use parse::{parse_spec_response, ParsedReply, ReplyScope};
pub use prompt::{build_prompt, correction_text, PromptBundle};

use crate::synth::{Proposal, Proposer, ProposerUnavailable, Request, Stage, TemplateProposer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited,
    #[error("server error: HTTP {0}")]
    Server(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("prompt is {bytes} bytes, over the {budget} byte budget")]
    ContextTooLarge { bytes: usize, budget: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl LlmError {
    fn transient(&self) -> bool {
        matches!(self, LlmError::Timeout | LlmError::RateLimited | LlmError::Server(_) | LlmError::Transport(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Chat-completions URL, e.g. `https://api.openai.com/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the key.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub prompt_budget: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "SPECFORGE_LLM_KEY".into(),
            temperature: 0.7,
            max_tokens: 4096,
            timeout_ms: 120_000,
            retries: 3,
            backoff_ms: 500,
            prompt_budget: 64 * 1024,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} is outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Message { role: role.to_string(), content: content.into() }
    }
}

/// One chat completion round trip.
pub trait Transport: Send + Sync {
    fn send(&self, cfg: &LlmConfig, messages: &[Message]) -> Result<String, LlmError>;
}

/// OpenAI-style `messages` JSON over HTTP(S).
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn send(&self, cfg: &LlmConfig, messages: &[Message]) -> Result<String, LlmError> {
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::Auth(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
                .http_status_as_error(false)
                .build(),
        );
        let body = json!({
            "model": cfg.model,
            "messages": messages,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        });
        let mut resp = agent
            .post(&cfg.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => LlmError::Timeout,
                ureq::Error::StatusCode(c) => status_error(c),
                e => LlmError::Transport(e.to_string()),
            })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(status_error(status));
        }
        let v: Value = resp.body_mut().read_json().map_err(|e| LlmError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))
    }
}

fn status_error(code: u16) -> LlmError {
    match code {
        401 | 403 => LlmError::Auth(format!("HTTP {code}")),
        429 => LlmError::RateLimited,
        500..=599 => LlmError::Server(code),
        c => LlmError::Transport(format!("HTTP {c}")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureReply {
    /// Substring of the last user message; absent matches anything.
    #[serde(default)]
    pub when: Option<String>,
    pub reply: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub replies: Vec<FixtureReply>,
}

/// Replays canned replies: the first entry whose `when` occurs in the last
/// user message answers.
pub struct FixtureTransport {
    pub fixture: Fixture,
}

impl FixtureTransport {
    pub fn load(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let fixture = serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(FixtureTransport { fixture })
    }
}

impl Transport for FixtureTransport {
    fn send(&self, _cfg: &LlmConfig, messages: &[Message]) -> Result<String, LlmError> {
        let last = messages.iter().rev().find(|m| m.role == "user").map(|m| m.content.as_str()).unwrap_or("");
        self.fixture
            .replies
            .iter()
            .find(|r| r.when.as_deref().is_none_or(|w| last.contains(w)))
            .map(|r| r.reply.clone())
            .ok_or_else(|| LlmError::Malformed("no fixture reply matches the request".into()))
    }
}

/// Panics if used; proves a code path makes no requests.
pub struct FailingTransport;

impl Transport for FailingTransport {
    fn send(&self, _cfg: &LlmConfig, _messages: &[Message]) -> Result<String, LlmError> {
        panic!("network transport used where none was expected")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LlmCosts {
    pub requests: u64,
    pub failures: u64,
    pub prompt_bytes: u64,
    pub reply_bytes: u64,
}

pub struct LlmClient {
    pub cfg: LlmConfig,
    transport: Box<dyn Transport>,
    /// Request/response JSON logs go here.
    pub log_dir: Option<PathBuf>,
    requests: AtomicU64,
    failures: AtomicU64,
    prompt_bytes: AtomicU64,
    reply_bytes: AtomicU64,
    log_lock: Mutex<u64>,
}

impl LlmClient {
    pub fn new(cfg: LlmConfig, transport: Box<dyn Transport>) -> Self {
        LlmClient {
            cfg,
            transport,
            log_dir: None,
            requests: AtomicU64::new(0),
            failures: AtomicU64::new(0),
            prompt_bytes: AtomicU64::new(0),
            reply_bytes: AtomicU64::new(0),
            log_lock: Mutex::new(0),
        }
    }

    pub fn costs(&self) -> LlmCosts {
        LlmCosts {
            requests: self.requests.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
            prompt_bytes: self.prompt_bytes.load(Ordering::Relaxed),
            reply_bytes: self.reply_bytes.load(Ordering::Relaxed),
        }
    }

    /// Sends `messages`, retrying transient failures with doubling backoff.
    pub fn chat(&self, messages: &[Message]) -> Result<String, LlmError> {
        self.cfg.validate()?;
        let bytes: usize = messages.iter().map(|m| m.content.len()).sum();
        let mut delay = self.cfg.backoff_ms;
        let mut attempt = 0;
        loop {
            self.requests.fetch_add(1, Ordering::Relaxed);
            self.prompt_bytes.fetch_add(bytes as u64, Ordering::Relaxed);
            let r = self.transport.send(&self.cfg, messages);
            self.log(messages, &r);
            match r {
                Ok(text) => {
                    self.reply_bytes.fetch_add(text.len() as u64, Ordering::Relaxed);
                    return Ok(text);
                }
                Err(e) => {
                    self.failures.fetch_add(1, Ordering::Relaxed);
                    if !e.transient() || attempt >= self.cfg.retries {
                        return Err(e);
                    }
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }

    pub fn complete(&self, bundle: &PromptBundle) -> Result<String, LlmError> {
        self.chat(&[Message::new("system", &bundle.system), Message::new("user", bundle.user_text())])
    }

    fn log(&self, messages: &[Message], r: &Result<String, LlmError>) {
        let Some(dir) = &self.log_dir else { return };
        let mut n = self.log_lock.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        let entry = json!({
            "endpoint": self.cfg.endpoint,
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
            "messages": messages,
            "reply": r.as_ref().ok(),
            "error": r.as_ref().err().map(|e| e.to_string()),
        });
        let text = redact(&serde_json::to_string_pretty(&entry).unwrap_or_default(), &self.cfg.api_key_env);
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join(format!("{:04}.json", *n)), text);
        }
    }
}

/// Replaces the value of the key variable, if set, wherever it occurs.
pub fn redact(text: &str, key_env: &str) -> String {
    match std::env::var(key_env) {
        Ok(k) if !k.is_empty() => text.replace(&k, "[REDACTED]"),
        _ => text.to_string(),
    }
}

/// Proposer that asks the model, one prompt per stage.
pub struct LlmProposer {
    pub client: Arc<LlmClient>,
}

impl LlmProposer {
    pub fn new(client: Arc<LlmClient>) -> Self {
        LlmProposer { client }
    }

    fn scope<'a>(stage: Stage, req: &Request<'a>) -> ReplyScope<'a> {
        let funcs = match stage {
            Stage::Host => vec![req.unit.host.clone()],
            Stage::Callee => req.unit.context.iter().skip(1).cloned().collect(),
        };
        ReplyScope { prog: req.prog, stage, funcs }
    }
}

fn unavailable(e: LlmError) -> ProposerUnavailable {
    ProposerUnavailable(e.to_string())
}

impl Proposer for LlmProposer {
    fn name(&self) -> &'static str {
        "llm"
    }

    fn propose(&mut self, stage: Stage, req: &Request<'_>) -> Result<Vec<Proposal>, ProposerUnavailable> {
        let bundle = build_prompt(stage, req, self.client.cfg.prompt_budget).map_err(unavailable)?;
        let text = self.client.complete(&bundle).map_err(unavailable)?;
        Ok(parse_spec_response(&text, &Self::scope(stage, req)).proposals)
    }

    fn correct(
        &mut self,
        stage: Stage,
        req: &Request<'_>,
        raw_text: &str,
        error: &str,
    ) -> Result<Option<Proposal>, ProposerUnavailable> {
        let bundle = build_prompt(stage, req, self.client.cfg.prompt_budget).map_err(unavailable)?;
        let msgs = [
            Message::new("system", &bundle.system),
            Message::new("user", bundle.user_text()),
            Message::new("assistant", format!("```c\n{raw_text}\n```")),
            Message::new("user", correction_text(raw_text, error)),
        ];
        let text = self.client.chat(&msgs).map_err(unavailable)?;
        Ok(parse_spec_response(&text, &Self::scope(stage, req)).proposals.into_iter().next())
    }
}

/// LLM proposals followed by template proposals.
pub fn hybrid(client: Arc<LlmClient>) -> crate::synth::HybridProposer {
    crate::synth::HybridProposer { primary: Box::new(LlmProposer::new(client)), fallback: TemplateProposer::new() }
}
