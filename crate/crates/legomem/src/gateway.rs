//! Uniform model-client abstraction: a remote chat-completion client over
//! a generic HTTP JSON protocol, a deterministic scripted client for
//! offline runs, and a record/replay cassette wrapper.
//!
//! Remote temperature is pinned to 0. The gateway never truncates
//! prompts; an over-length prompt is the caller's bug and surfaces as the
//! endpoint's error.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("model provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("scripted client has no entry matching the last user message: {preview}")]
    ScriptExhausted { preview: String },
    #[error("cassette has no recording for this request (hash {hash})")]
    CassetteMiss { hash: String },
    #[error("cassette io failure: {0}")]
    CassetteIo(String),
    #[error("messages must be non-empty and end with a user message")]
    BadMessageSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// A chat model. Scripted clients are pure functions of the message
/// sequence; all clients must tolerate concurrent calls.
pub trait ModelClient: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError>;
}

fn validate_messages(messages: &[ChatMessage]) -> Result<&ChatMessage, GatewayError> {
    let last = messages.last().ok_or(GatewayError::BadMessageSequence)?;
    if last.role != Role::User {
        return Err(GatewayError::BadMessageSequence);
    }
    Ok(last)
}

// ---------------------------------------------------------------------------
// Scripted client
// ---------------------------------------------------------------------------

/// One scripted response: fires when every literal substring in `matcher`
/// appears in the last user message. Entries are checked in script order;
/// the first match wins. `max_uses: None` means unlimited.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub matcher: Vec<String>,
    pub response: String,
    #[serde(default)]
    pub max_uses: Option<u32>,
}

impl ScriptEntry {
    pub fn new<S: Into<String>>(matcher: Vec<S>, response: impl Into<String>) -> Self {
        Self {
            matcher: matcher.into_iter().map(Into::into).collect(),
            response: response.into(),
            max_uses: None,
        }
    }

    pub fn once<S: Into<String>>(matcher: Vec<S>, response: impl Into<String>) -> Self {
        Self {
            max_uses: Some(1),
            ..Self::new(matcher, response)
        }
    }
}

/// Deterministic offline stand-in for a chat model. A message no entry
/// matches is always a test bug, so it fails loudly.
pub struct ScriptedClient {
    name: String,
    entries: Vec<ScriptEntry>,
    uses: Mutex<Vec<u32>>,
}

impl ScriptedClient {
    pub fn new(name: impl Into<String>, entries: Vec<ScriptEntry>) -> Self {
        let uses = Mutex::new(vec![0; entries.len()]);
        Self {
            name: name.into(),
            entries,
            uses,
        }
    }
}

impl ModelClient for ScriptedClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        let last = validate_messages(messages)?;
        let mut uses = self.uses.lock().expect("script counters poisoned");
        for (i, entry) in self.entries.iter().enumerate() {
            if let Some(cap) = entry.max_uses {
                if uses[i] >= cap {
                    continue;
                }
            }
            if entry.matcher.iter().all(|m| last.content.contains(m)) {
                uses[i] += 1;
                return Ok(entry.response.clone());
            }
        }
        let preview: String = last.content.chars().take(120).collect();
        Err(GatewayError::ScriptExhausted { preview })
    }
}

// ---------------------------------------------------------------------------
// Remote client
// ---------------------------------------------------------------------------

/// Remote chat endpoint settings. The request body is
/// `{"model", "messages", "temperature": 0}`; the assistant text is read
/// from the response at `response_path` (dot-separated keys and array
/// indices). The auth token comes from the environment variable named by
/// `auth_env`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteClientConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    #[serde(default = "default_response_path")]
    pub response_path: String,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_auth_env() -> String {
    "LEGOMEM_API_KEY".into()
}

fn default_response_path() -> String {
    "choices.0.message.content".into()
}

fn default_max_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_max_in_flight() -> usize {
    4
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    state: Mutex<usize>,
    released: Condvar,
    cap: usize,
}

impl InFlight {
    fn new(cap: usize) -> Self {
        Self {
            state: Mutex::new(0),
            released: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) {
        let mut in_flight = self.state.lock().expect("in-flight counter poisoned");
        while *in_flight >= self.cap {
            in_flight = self.released.wait(in_flight).expect("in-flight wait");
        }
        *in_flight += 1;
    }

    fn release(&self) {
        *self.state.lock().expect("in-flight counter poisoned") -= 1;
        self.released.notify_one();
    }
}

pub struct RemoteClient {
    config: RemoteClientConfig,
    client: reqwest::blocking::Client,
    in_flight: InFlight,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f32,
}

fn lookup_path<'v>(value: &'v Value, path: &str) -> Option<&'v Value> {
    let mut cursor = value;
    for segment in path.split('.') {
        cursor = match cursor {
            Value::Array(items) => items.get(segment.parse::<usize>().ok()?)?,
            Value::Object(map) => map.get(segment)?,
            _ => return None,
        };
    }
    Some(cursor)
}

impl RemoteClient {
    pub fn new(config: RemoteClientConfig) -> Self {
        let in_flight = InFlight::new(config.max_in_flight);
        Self {
            config,
            client: reqwest::blocking::Client::new(),
            in_flight,
        }
    }

    fn call_once(&self, messages: &[ChatMessage]) -> Result<String, String> {
        let body = serde_json::to_string(&ChatRequest {
            model: &self.config.model,
            messages,
            temperature: 0.0,
        })
        .map_err(|e| e.to_string())?;
        let mut request = self
            .client
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .body(body);
        if let Ok(token) = std::env::var(&self.config.auth_env) {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let response = request.send().map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("endpoint returned status {}", response.status()));
        }
        let text = response.text().map_err(|e| e.to_string())?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| format!("response is not JSON: {e}"))?;
        match lookup_path(&value, &self.config.response_path) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(format!(
                "response path {} is not a string: {other}",
                self.config.response_path
            )),
            None => Err(format!(
                "response path {} not found in body",
                self.config.response_path
            )),
        }
    }
}

impl ModelClient for RemoteClient {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        validate_messages(messages)?;
        self.in_flight.acquire();
        let result = (|| {
            let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
            let mut last_error = String::new();
            for attempt in 0..self.config.max_attempts {
                if attempt > 0 {
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                match self.call_once(messages) {
                    Ok(text) => return Ok(text),
                    Err(e) => last_error = e,
                }
            }
            Err(GatewayError::ProviderUnavailable(last_error))
        })();
        self.in_flight.release();
        result
    }
}

// ---------------------------------------------------------------------------
// Record / replay cassettes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassetteMode {
    Record,
    Replay,
}

#[derive(Debug, Serialize, Deserialize)]
struct CassetteLine {
    seq: u64,
    request_hash: String,
    response: String,
}

fn request_hash(messages: &[ChatMessage]) -> String {
    let canonical = serde_json::to_string(messages).expect("messages serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

struct CassetteState {
    seq: u64,
    recordings: HashMap<String, std::collections::VecDeque<String>>,
}

/// Wraps a client with JSON Lines record/replay. Record mode appends
/// `(request hash, response)` per call; replay mode serves recordings
/// FIFO per hash and errors on a miss.
pub struct CassetteClient {
    name: String,
    inner: Option<Arc<dyn ModelClient>>,
    mode: CassetteMode,
    path: PathBuf,
    state: Mutex<CassetteState>,
}

impl CassetteClient {
    /// Record mode: every completion goes through `inner` and is appended
    /// to the cassette file.
    pub fn record(inner: Arc<dyn ModelClient>, path: impl Into<PathBuf>) -> Self {
        Self {
            name: format!("record({})", inner.name()),
            inner: Some(inner),
            mode: CassetteMode::Record,
            path: path.into(),
            state: Mutex::new(CassetteState {
                seq: 0,
                recordings: HashMap::new(),
            }),
        }
    }

    /// Replay mode: completions are served from the cassette file alone.
    pub fn replay(path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        let raw = fs::read_to_string(&path).map_err(|e| GatewayError::CassetteIo(e.to_string()))?;
        let mut recordings: HashMap<String, std::collections::VecDeque<String>> = HashMap::new();
        let mut seq = 0;
        for line in raw.lines() {
            let parsed: CassetteLine = serde_json::from_str(line)
                .map_err(|e| GatewayError::CassetteIo(format!("bad cassette line: {e}")))?;
            recordings
                .entry(parsed.request_hash)
                .or_default()
                .push_back(parsed.response);
            seq = seq.max(parsed.seq);
        }
        Ok(Self {
            name: "replay".into(),
            inner: None,
            mode: CassetteMode::Replay,
            path,
            state: Mutex::new(CassetteState { seq, recordings }),
        })
    }
}

impl ModelClient for CassetteClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        validate_messages(messages)?;
        let hash = request_hash(messages);
        match self.mode {
            CassetteMode::Record => {
                let inner = self.inner.as_ref().expect("record mode has an inner client");
                let response = inner.complete(messages)?;
                let mut state = self.state.lock().expect("cassette state poisoned");
                state.seq += 1;
                let line = CassetteLine {
                    seq: state.seq,
                    request_hash: hash,
                    response: response.clone(),
                };
                let mut file = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.path)
                    .map_err(|e| GatewayError::CassetteIo(e.to_string()))?;
                writeln!(file, "{}", serde_json::to_string(&line).expect("line serializes"))
                    .map_err(|e| GatewayError::CassetteIo(e.to_string()))?;
                Ok(response)
            }
            CassetteMode::Replay => {
                let mut state = self.state.lock().expect("cassette state poisoned");
                match state.recordings.get_mut(&hash).and_then(|q| q.pop_front()) {
                    Some(response) => Ok(response),
                    None => Err(GatewayError::CassetteMiss { hash }),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_first_match_wins() {
        let client = ScriptedClient::new(
            "s",
            vec![
                ScriptEntry::new(vec!["plan"], "first"),
                ScriptEntry::new(vec!["plan", "extra"], "second"),
            ],
        );
        let got = client
            .complete(&[ChatMessage::user("please plan with extra care")])
            .unwrap();
        assert_eq!(got, "first");
    }

    #[test]
    fn scripted_exhaustion_fails_loud() {
        let client = ScriptedClient::new("s", vec![ScriptEntry::new(vec!["never"], "x")]);
        let err = client
            .complete(&[ChatMessage::user("something else")])
            .unwrap_err();
        assert!(matches!(err, GatewayError::ScriptExhausted { .. }));
    }

    #[test]
    fn scripted_max_uses_consumes_entries_in_order() {
        let client = ScriptedClient::new(
            "s",
            vec![
                ScriptEntry::once(vec!["go"], "one"),
                ScriptEntry::once(vec!["go"], "two"),
            ],
        );
        let msg = [ChatMessage::user("go")];
        assert_eq!(client.complete(&msg).unwrap(), "one");
        assert_eq!(client.complete(&msg).unwrap(), "two");
        assert!(client.complete(&msg).is_err());
    }

    #[test]
    fn message_sequence_validation() {
        let client = ScriptedClient::new("s", vec![]);
        assert!(matches!(
            client.complete(&[]),
            Err(GatewayError::BadMessageSequence)
        ));
        let assistant_last = [ChatMessage {
            role: Role::Assistant,
            content: "x".into(),
        }];
        assert!(matches!(
            client.complete(&assistant_last),
            Err(GatewayError::BadMessageSequence)
        ));
    }

    #[test]
    fn response_path_lookup() {
        let body: Value = serde_json::from_str(
            r#"{"choices": [{"message": {"content": "hello"}}], "usage": {"total": 3}}"#,
        )
        .unwrap();
        assert_eq!(
            lookup_path(&body, "choices.0.message.content"),
            Some(&Value::String("hello".into()))
        );
        assert!(lookup_path(&body, "choices.1.message").is_none());
        assert!(lookup_path(&body, "nope").is_none());
    }

    #[test]
    fn record_then_replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cassette.jsonl");
        let inner = Arc::new(ScriptedClient::new(
            "inner",
            vec![
                ScriptEntry::new(vec!["alpha"], "A"),
                ScriptEntry::new(vec!["beta"], "B"),
            ],
        ));
        let recorder = CassetteClient::record(inner, &path);
        let alpha = [ChatMessage::user("alpha")];
        let beta = [ChatMessage::user("beta")];
        assert_eq!(recorder.complete(&alpha).unwrap(), "A");
        assert_eq!(recorder.complete(&beta).unwrap(), "B");
        assert_eq!(recorder.complete(&alpha).unwrap(), "A");

        let replayer = CassetteClient::replay(&path).unwrap();
        assert_eq!(replayer.complete(&alpha).unwrap(), "A");
        assert_eq!(replayer.complete(&beta).unwrap(), "B");
        assert_eq!(replayer.complete(&alpha).unwrap(), "A");
        // A fourth, unrecorded request misses.
        let err = replayer.complete(&alpha).unwrap_err();
        assert!(matches!(err, GatewayError::CassetteMiss { .. }));
        let err = replayer
            .complete(&[ChatMessage::user("mutated prompt")])
            .unwrap_err();
        assert!(matches!(err, GatewayError::CassetteMiss { .. }));
    }

    #[test]
    fn cassette_lines_are_append_ordered_and_hashed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cassette.jsonl");
        let inner = Arc::new(ScriptedClient::new(
            "inner",
            vec![ScriptEntry::new(vec![""], "ok")],
        ));
        let recorder = CassetteClient::record(inner, &path);
        let first = [ChatMessage::user("first")];
        let second = [ChatMessage::user("second")];
        recorder.complete(&first).unwrap();
        recorder.complete(&second).unwrap();

        let raw = fs::read_to_string(&path).unwrap();
        let lines: Vec<CassetteLine> = raw
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].seq, 1);
        assert_eq!(lines[1].seq, 2);
        assert_eq!(lines[0].request_hash, request_hash(&first));
        assert_eq!(lines[1].request_hash, request_hash(&second));
    }
}
