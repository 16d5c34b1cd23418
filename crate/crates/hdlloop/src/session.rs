//! Chat backends and the session that owns the conversation record.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use hdlloop_core::conversation::{ChatMessage, Conversation, MessagePhase, Role};
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::prompt::FIX_OUTPUT_LINE_LIMIT;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::record::{Header, LogError, LogRecord, LogWriter, Transcript, LOG_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("authentication: {0}")]
    Auth(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("scripted transcript has no reply for prompt {position} take {take}")]
    ReplayUnderrun { position: usize, take: usize },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("operator input closed")]
    Closed,
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SessionError {
    pub fn is_transport(&self) -> bool {
        matches!(self, SessionError::Auth(_) | SessionError::Transport { .. })
    }
}

/// What the session asks of a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ask {
    /// A reply to a newly appended user message.
    Reply,
    /// Another attempt at the reply to the same user message.
    Retake,
}

pub trait ChatBackend: Send {
    /// `context` is the live history ending with the user message to answer.
    fn complete(&mut self, context: &[ChatMessage], ask: Ask) -> Result<String, SessionError>;
    fn name(&self) -> &'static str;
    fn model(&self) -> Option<String> {
        None
    }
    fn temperature(&self) -> Option<f64> {
        None
    }
}

/// Replies from a transcript, one position per user prompt.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    positions: Vec<Vec<String>>,
    position: Option<usize>,
    take: usize,
}

impl ScriptedBackend {
    pub fn new(transcript: &Transcript) -> Self {
        ScriptedBackend { positions: transcript.positions.clone(), position: None, take: 0 }
    }

    pub fn from_replies(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ScriptedBackend { positions: replies.into_iter().map(|r| vec![r.into()]).collect(), position: None, take: 0 }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&mut self, _context: &[ChatMessage], ask: Ask) -> Result<String, SessionError> {
        match ask {
            Ask::Reply => {
                self.position = Some(self.position.map_or(0, |p| p + 1));
                self.take = 0;
            }
            Ask::Retake => self.take += 1,
        }
        let position = self.position.unwrap_or(0);
        self.positions
            .get(position)
            .and_then(|takes| takes.get(self.take))
            .cloned()
            .ok_or(SessionError::ReplayUnderrun { position: position + 1, take: self.take + 1 })
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    pub retriable: bool,
}

/// Moves one JSON request to a chat-completion endpoint.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, bearer: &str, body: &Value) -> Result<Value, TransportError>;
}

#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().expect("http client");
        HttpTransport { client }
    }
}

impl Transport for HttpTransport {
    fn post(&self, url: &str, bearer: &str, body: &Value) -> Result<Value, TransportError> {
        let resp = self.client.post(url).bearer_auth(bearer).json(body).send().map_err(|e| TransportError {
            message: e.to_string(),
            retriable: e.is_timeout() || e.is_connect() || e.is_request(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(TransportError {
                message: format!("HTTP {status}: {}", text.chars().take(500).collect::<String>()),
                retriable: status.is_server_error() || status.as_u16() == 429,
            });
        }
        resp.json().map_err(|e| TransportError { message: e.to_string(), retriable: false })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer credential.
    pub api_key_env: String,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub request_timeout: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: "HDLLOOP_API_KEY".into(),
            temperature: None,
            top_p: None,
            max_tokens: None,
            max_attempts: 4,
            initial_backoff: Duration::from_millis(500),
            request_timeout: Duration::from_secs(300),
        }
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct RemoteBackend {
    config: RemoteConfig,
    key: String,
    transport: Box<dyn Transport>,
    sleep: Sleeper,
    /// One entry per HTTP attempt: `None` for success, the error otherwise.
    pub attempts: Vec<Option<String>>,
}

impl RemoteBackend {
    pub fn open(config: RemoteConfig) -> Result<Self, SessionError> {
        let transport = Box::new(HttpTransport::new(config.request_timeout));
        Self::with_transport(config, transport, Arc::new(std::thread::sleep))
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>, sleep: Sleeper) -> Result<Self, SessionError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| SessionError::Auth(format!("credential variable {} is not set", config.api_key_env)))?;
        Ok(RemoteBackend { config, key, transport, sleep, attempts: Vec::new() })
    }

    fn body(&self, context: &[ChatMessage]) -> Value {
        let messages: Vec<Value> = context
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        let mut body = json!({ "model": self.config.model, "messages": messages });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(p) = self.config.top_p {
            body["top_p"] = json!(p);
        }
        if let Some(n) = self.config.max_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&mut self, context: &[ChatMessage], _ask: Ask) -> Result<String, SessionError> {
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let body = self.body(context);
        let mut backoff = self.config.initial_backoff;
        let mut tries = 0;
        loop {
            tries += 1;
            match self.transport.post(&url, &self.key, &body) {
                Ok(v) => {
                    self.attempts.push(None);
                    return v["choices"][0]["message"]["content"].as_str().map(String::from).ok_or_else(|| SessionError::Transport {
                        message: "response has no choices[0].message.content".into(),
                        attempts: tries,
                    });
                }
                Err(e) => {
                    tracing::warn!(attempt = tries, retriable = e.retriable, "chat request failed: {}", e.message);
                    self.attempts.push(Some(e.message.clone()));
                    if !e.retriable || tries >= self.config.max_attempts {
                        return Err(SessionError::Transport { message: e.message, attempts: tries });
                    }
                    (self.sleep)(backoff);
                    backoff *= 2;
                }
            }
        }
    }

    fn name(&self) -> &'static str {
        "remote"
    }

    fn model(&self) -> Option<String> {
        Some(self.config.model.clone())
    }

    fn temperature(&self) -> Option<f64> {
        self.config.temperature
    }
}

/// A human pastes the model's replies. Input for one reply ends at a line
/// holding only `.`, or at end of input.
pub struct InteractiveBackend {
    input: Box<dyn BufRead + Send>,
    output: Box<dyn Write + Send>,
}

impl InteractiveBackend {
    pub fn new(input: Box<dyn BufRead + Send>, output: Box<dyn Write + Send>) -> Self {
        InteractiveBackend { input, output }
    }

    pub fn stdio() -> Self {
        Self::new(Box::new(std::io::BufReader::new(std::io::stdin())), Box::new(std::io::stderr()))
    }
}

/// Reads lines until a lone `.` or end of input. `None` when nothing was read.
pub fn read_block(input: &mut dyn BufRead) -> std::io::Result<Option<String>> {
    let mut text = String::new();
    let mut any = false;
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        any = true;
        if line.trim_end_matches(['\r', '\n']) == "." {
            break;
        }
        text.push_str(&line);
    }
    Ok(any.then(|| text.trim_end_matches('\n').to_string()))
}

impl ChatBackend for InteractiveBackend {
    fn complete(&mut self, context: &[ChatMessage], ask: Ask) -> Result<String, SessionError> {
        let last = context.last().map(|m| m.content.as_str()).unwrap_or("");
        let what = if ask == Ask::Retake { "regenerate the reply to" } else { "send" };
        writeln!(self.output, "\n=== {what} this prompt, then paste the reply and end it with a line holding `.` ===\n{last}\n")?;
        self.output.flush()?;
        read_block(&mut *self.input)?.ok_or(SessionError::Closed)
    }

    fn name(&self) -> &'static str {
        "interactive"
    }
}

/// Message timestamps: wall clock for live backends, a counter for scripted ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    Wall,
    Logical,
}

/// Identification written at the head of the log.
#[derive(Debug, Clone)]
pub struct SessionMeta {
    pub conversation_id: String,
    pub benchmark_id: String,
    pub trial_label: String,
    pub limits: LoopLimits,
}

/// A conversation with one backend. Every exchange is persisted before
/// `send` or `regenerate` returns.
pub struct Session {
    pub conversation: Conversation,
    backend: Box<dyn ChatBackend>,
    log: Option<LogWriter>,
    clock: Clock,
    /// Records written, kept in memory for replay comparison.
    pub records: Vec<LogRecord>,
}

impl Session {
    pub fn open(meta: &SessionMeta, backend: Box<dyn ChatBackend>, log: Option<LogWriter>) -> Result<Session, SessionError> {
        let clock = if backend.name() == "scripted" { Clock::Logical } else { Clock::Wall };
        let header = Header {
            v: LOG_VERSION,
            conversation_id: meta.conversation_id.clone(),
            benchmark_id: meta.benchmark_id.clone(),
            trial_label: meta.trial_label.clone(),
            backend: backend.name().to_string(),
            model: backend.model(),
            temperature: backend.temperature(),
            limits: Some(meta.limits),
            fix_output_line_limit: Some(FIX_OUTPUT_LINE_LIMIT),
        };
        let mut s = Session {
            conversation: Conversation::new(&meta.conversation_id, &meta.benchmark_id, &meta.trial_label),
            backend,
            log,
            clock,
            records: Vec::new(),
        };
        s.persist(LogRecord::Header(header))?;
        Ok(s)
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn persist(&mut self, r: LogRecord) -> Result<(), SessionError> {
        if let Some(w) = &mut self.log {
            w.append(&r)?;
        }
        self.records.push(r);
        Ok(())
    }

    fn now(&self) -> u64 {
        match self.clock {
            Clock::Logical => self.conversation.messages.len() as u64,
            Clock::Wall => chrono::Utc::now().timestamp_millis().max(0) as u64,
        }
    }

    fn push(&mut self, mut m: ChatMessage) -> Result<usize, SessionError> {
        m.timestamp = self.now();
        let index = self.conversation.messages.len();
        self.persist(LogRecord::Message { index, message: m.clone() })?;
        self.conversation.messages.push(m);
        Ok(index)
    }

    fn context(&self) -> Vec<ChatMessage> {
        self.conversation.live_messages().cloned().collect()
    }

    /// Appends `message` (a user message) and the backend's reply.
    pub fn send(&mut self, message: ChatMessage) -> Result<ChatMessage, SessionError> {
        if message.role != Role::User {
            return Err(SessionError::Precondition("only user messages are sent".into()));
        }
        if self.conversation.last_live().is_some_and(|m| m.role == Role::User) {
            return Err(SessionError::Precondition("the previous message has no reply yet".into()));
        }
        let (phase, level) = (message.phase, message.feedback_level);
        self.push(message)?;
        let text = self.backend.complete(&self.context(), Ask::Reply)?;
        let reply = ChatMessage::assistant(text, phase, level);
        self.push(reply.clone())?;
        Ok(self.conversation.messages.last().cloned().unwrap_or(reply))
    }

    /// Asks again for the reply to the last user message. The previous
    /// attempt stays in the log, marked superseded.
    pub fn regenerate(&mut self) -> Result<ChatMessage, SessionError> {
        let Some(last) = self.conversation.messages.iter().rposition(|m| m.role == Role::Assistant && !m.superseded) else {
            return Err(SessionError::Precondition("nothing to regenerate".into()));
        };
        if self.conversation.messages[last + 1..].iter().any(|m| m.role == Role::User) {
            return Err(SessionError::Precondition("the last reply has already been answered".into()));
        }
        let (phase, level) = (self.conversation.messages[last].phase, self.conversation.messages[last].feedback_level);
        self.conversation.messages[last].superseded = true;
        self.persist(LogRecord::Superseded { index: last })?;
        let text = self.backend.complete(&self.context(), Ask::Retake)?;
        let reply = ChatMessage::assistant(text, phase, level);
        self.push(reply.clone())?;
        Ok(self.conversation.messages.last().cloned().unwrap_or(reply))
    }

    /// Index of the newest message.
    pub fn last_index(&self) -> usize {
        self.conversation.messages.len().saturating_sub(1)
    }
}

/// Convenience for a continuation prompt message.
pub fn continuation(text: &str) -> ChatMessage {
    ChatMessage::user(text, MessagePhase::Continuation, None)
}

/// Shared, swappable queue of scripted operator actions.
pub type ActionQueue = Arc<Mutex<VecDeque<crate::record::ScriptedAction>>>;
