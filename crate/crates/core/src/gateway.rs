//! Provider-agnostic chat completion.
//!
//! A [`Gateway`] turns a [`PromptBundle`] into the message list sent to a
//! [`ChatModel`], records that exact serialized prompt in a [`CaptureHook`],
//! and optionally runs a decode/validate/re-ask loop against one of the
//! shipped JSON schemas.
//!
//! Two models ship: [`ScriptedModel`], which replays a fixed queue of
//! replies and is used by every test, and [`RemoteModel`], which speaks the
//! common `{model, messages}` chat-completion HTTP contract.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const ENV_ENDPOINT: &str = "STORYBOT_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "STORYBOT_LLM_API_KEY";
pub const ENV_MODEL: &str = "STORYBOT_LLM_MODEL";
pub const ENV_TIMEOUT: &str = "STORYBOT_LLM_TIMEOUT_SECS";

pub const DEFAULT_RETRY_BUDGET: u32 = 3;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub author: Author,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

/// Schemas a structured reply can be held to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    GoalSet,
    HelpSuggestions,
}

impl SchemaId {
    pub const ALL: [SchemaId; 2] = [SchemaId::GoalSet, SchemaId::HelpSuggestions];

    /// The schema document as shipped in `schemas/`.
    pub fn source(self) -> &'static str {
        match self {
            SchemaId::GoalSet => include_str!("../schemas/goalset.schema.json"),
            SchemaId::HelpSuggestions => include_str!("../schemas/help_suggestions.schema.json"),
        }
    }

    fn validator(self) -> &'static jsonschema::Validator {
        static GOALSET: OnceLock<jsonschema::Validator> = OnceLock::new();
        static HELP: OnceLock<jsonschema::Validator> = OnceLock::new();
        let cell = match self {
            SchemaId::GoalSet => &GOALSET,
            SchemaId::HelpSuggestions => &HELP,
        };
        cell.get_or_init(|| {
            let doc: serde_json::Value = serde_json::from_str(self.source()).expect("shipped schema is JSON");
            jsonschema::validator_for(&doc).expect("shipped schema compiles")
        })
    }

    /// Check a document against the schema, returning the first failure.
    pub fn check(self, doc: &serde_json::Value) -> Result<(), String> {
        match self.validator().iter_errors(doc).next() {
            None => Ok(()),
            Some(e) => Err(format!("{} (at `{}`)", e, e.instance_path())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotExample {
    pub input: String,
    pub output: String,
}

/// Everything needed to build one model request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub one_shot_example: Option<OneShotExample>,
    pub history: Vec<ChatTurn>,
    pub response_schema: Option<SchemaId>,
}

impl PromptBundle {
    pub fn new(system: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            one_shot_example: None,
            history: Vec::new(),
            response_schema: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.system.trim().is_empty() {
            return Err(GatewayError::InvalidBundle("system prompt is empty".into()));
        }
        Ok(())
    }

    /// The chat messages sent to the model.
    pub fn messages(&self) -> Vec<Message> {
        let mut system = self.system.clone();
        if let Some(schema) = self.response_schema {
            system.push_str(
                "\n\nRespond with a single JSON document and nothing else. \
                 It must conform to this JSON schema:\n",
            );
            system.push_str(schema.source().trim_end());
        }
        let mut out = vec![Message::new(Role::System, system)];
        if let Some(ex) = &self.one_shot_example {
            out.push(Message::new(Role::User, ex.input.clone()));
            out.push(Message::new(Role::Assistant, ex.output.clone()));
        }
        out.extend(self.history.iter().map(|turn| {
            let role = match turn.author {
                Author::User => Role::User,
                Author::Agent => Role::Assistant,
            };
            Message::new(role, turn.text.clone())
        }));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("model request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("scripted model has no replies left")]
    ScriptExhausted,
    #[error("invalid prompt bundle: {0}")]
    InvalidBundle(String),
}

/// The reply never satisfied the schema within the retry budget.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("reply failed schema after {attempts} attempts: {last_failure}")]
pub struct SchemaError {
    pub attempts: u32,
    pub last_failure: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructuredError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[async_trait]
pub trait ChatModel: Send + Sync {
    async fn chat(&self, messages: &[Message]) -> Result<String, GatewayError>;
}

/// Replays a fixed queue of replies in order.
#[derive(Debug, Default)]
pub struct ScriptedModel {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedModel {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(replies.into_iter().map(Into::into).collect()),
        }
    }

    /// Parse a script: a JSON array whose string elements are replies
    /// verbatim and whose other elements are replies serialized as compact
    /// JSON.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let items: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Ok(Self::new(items.into_iter().map(|v| match v {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        })))
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn push(&self, reply: impl Into<String>) {
        self.queue.lock().unwrap().push_back(reply.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

#[async_trait]
impl ChatModel for ScriptedModel {
    async fn chat(&self, _messages: &[Message]) -> Result<String, GatewayError> {
        self.queue.lock().unwrap().pop_front().ok_or(GatewayError::ScriptExhausted)
    }
}

/// Any service accepting `{"model", "messages"}` and answering in the
/// common `choices[0].message.content` shape.
#[derive(Debug, Clone)]
pub struct RemoteModel {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl RemoteModel {
    pub fn new(endpoint: String, api_key: Option<String>, model: String, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            api_key,
            model,
        })
    }

    /// Read endpoint, key, model and timeout from the environment, falling
    /// back to `default_timeout`.
    pub fn from_env(default_timeout: Duration) -> Result<Self, GatewayError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| GatewayError::Transport(format!("{ENV_ENDPOINT} is not set")))?;
        let api_key = std::env::var(ENV_API_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_owned());
        let timeout = std::env::var(ENV_TIMEOUT)
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|s| *s > 0.0)
            .map(Duration::from_secs_f64)
            .unwrap_or(default_timeout);
        Self::new(endpoint, api_key, model, timeout)
    }
}

fn reply_text(body: &serde_json::Value) -> Option<String> {
    body.pointer("/choices/0/message/content")
        .or_else(|| body.pointer("/message/content"))
        .or_else(|| body.get("content"))
        .or_else(|| body.get("text"))
        .and_then(|v| v.as_str())
        .map(str::to_owned)
}

#[async_trait]
impl ChatModel for RemoteModel {
    async fn chat(&self, messages: &[Message]) -> Result<String, GatewayError> {
        let mut req = self.client.post(&self.endpoint).json(&serde_json::json!({
            "model": self.model,
            "messages": messages,
        }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(GatewayError::Auth(status.to_string()));
        }
        if !status.is_success() {
            return Err(GatewayError::Transport(format!("HTTP {status}")));
        }
        let body: serde_json::Value = resp.json().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        reply_text(&body).ok_or_else(|| GatewayError::Transport("reply has no message content".into()))
    }
}

/// Records every serialized prompt sent through a gateway.
#[derive(Debug, Clone, Default)]
pub struct CaptureHook {
    prompts: Arc<Mutex<Vec<String>>>,
}

impl CaptureHook {
    fn record(&self, prompt: String) {
        self.prompts.lock().unwrap().push(prompt);
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn last(&self) -> Option<String> {
        self.prompts.lock().unwrap().last().cloned()
    }

    pub fn clear(&self) {
        self.prompts.lock().unwrap().clear();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provider {
    ScriptedMock { script: std::path::PathBuf },
    RemoteHttp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub provider: Provider,
    pub retry_budget: u32,
    pub timeout: Duration,
}

impl GatewayConfig {
    pub fn new(provider: Provider) -> Self {
        Self {
            provider,
            retry_budget: DEFAULT_RETRY_BUDGET,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Instantiate the configured model.
    pub fn build(&self) -> Result<Gateway, GatewayError> {
        if self.timeout.is_zero() {
            return Err(GatewayError::InvalidBundle("timeout must be positive".into()));
        }
        let model: Arc<dyn ChatModel> = match &self.provider {
            Provider::ScriptedMock { script } => {
                Arc::new(ScriptedModel::from_file(script).map_err(GatewayError::Transport)?)
            }
            Provider::RemoteHttp => Arc::new(RemoteModel::from_env(self.timeout)?),
        };
        Ok(Gateway::new(model).with_retry_budget(self.retry_budget))
    }
}

/// A decoded structured reply and the number of model calls it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Structured<T> {
    pub value: T,
    pub attempts: u32,
}

#[derive(Clone)]
pub struct Gateway {
    model: Arc<dyn ChatModel>,
    retry_budget: u32,
    capture: CaptureHook,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("retry_budget", &self.retry_budget)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        Self {
            model,
            retry_budget: DEFAULT_RETRY_BUDGET,
            capture: CaptureHook::default(),
        }
    }

    /// A gateway over a [`ScriptedModel`] holding `replies`.
    pub fn scripted<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(Arc::new(ScriptedModel::new(replies)))
    }

    pub fn with_retry_budget(mut self, budget: u32) -> Self {
        self.retry_budget = budget;
        self
    }

    pub fn retry_budget(&self) -> u32 {
        self.retry_budget
    }

    pub fn capture(&self) -> &CaptureHook {
        &self.capture
    }

    async fn send(&self, messages: &[Message]) -> Result<String, GatewayError> {
        self.capture
            .record(serde_json::to_string(messages).expect("messages serialize"));
        self.model.chat(messages).await
    }

    /// One model call; returns the raw reply text.
    pub async fn complete(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        bundle.validate()?;
        self.send(&bundle.messages()).await
    }

    /// Ask for a document matching `bundle.response_schema`, decode it as `T`
    /// and run `check` on it. Any failure is fed back to the model with the
    /// reason, up to the retry budget.
    pub async fn complete_structured<T, F>(&self, bundle: &PromptBundle, check: F) -> Result<Structured<T>, StructuredError>
    where
        T: DeserializeOwned,
        F: Fn(&T) -> Result<(), String>,
    {
        bundle.validate()?;
        let schema = bundle
            .response_schema
            .ok_or_else(|| GatewayError::InvalidBundle("no response schema set".into()))?;
        let mut messages = bundle.messages();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let reply = self.send(&messages).await?;
            let failure = match accept(&reply, schema, &check) {
                Ok(value) => return Ok(Structured { value, attempts }),
                Err(reason) => reason,
            };
            if attempts > self.retry_budget {
                return Err(SchemaError {
                    attempts,
                    last_failure: failure,
                }
                .into());
            }
            messages.push(Message::new(Role::Assistant, reply));
            messages.push(Message::new(
                Role::User,
                format!(
                    "Your previous reply was rejected: {failure}. Reply again with only the JSON document, \
                     conforming exactly to the schema."
                ),
            ));
        }
    }
}

/// Strip a surrounding Markdown code fence, if any.
fn unfence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

fn accept<T, F>(reply: &str, schema: SchemaId, check: &F) -> Result<T, String>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<(), String>,
{
    let doc: serde_json::Value =
        serde_json::from_str(unfence(reply)).map_err(|e| format!("reply is not valid JSON: {e}"))?;
    schema.check(&doc)?;
    let value: T = serde_json::from_value(doc).map_err(|e| format!("reply does not decode: {e}"))?;
    check(&value)?;
    Ok(value)
}
