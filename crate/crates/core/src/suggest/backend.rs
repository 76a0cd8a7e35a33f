//! Suggestion backends: a remote chat-completion model, a transcript replayer,
//! and a scripted table for deterministic tests.
//!
//! A query counts once a response is delivered. Transport retries and failed
//! lookups never touch the counter.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::SuggestionResponse;
use super::prompt::PromptBundle;

/// Environment variable holding the remote credential.
pub const API_KEY_ENV: &str = "FEAS_API_KEY";
pub const ENDPOINT_ENV: &str = "FEAS_ENDPOINT";
pub const MODEL_ENV: &str = "FEAS_MODEL";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned HTTP {status}")]
    Http { status: u16 },
    #[error("malformed backend reply: {0}")]
    Malformed(String),
    #[error("transcript exhausted after {0} record(s)")]
    TranscriptExhausted(usize),
    #[error("transcript diverged at record {index}: recorded prompt {recorded}, got {actual}")]
    TranscriptDiverged { index: usize, recorded: String, actual: String },
    #[error("no scripted response for state `{0}`")]
    MissingScript(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid {what}: {message}")]
    Format { what: String, message: String },
    #[error("missing configuration: {0}")]
    Config(String),
}

impl BackendError {
    fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        BackendError::Io {
            context: context.into(),
            source,
        }
    }
}

/// Anything that turns a prompt into raw model text.
pub trait SuggestionBackend: Send {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError>;
}

impl<B: SuggestionBackend + ?Sized> SuggestionBackend for Box<B> {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
}

/// Number of delivered responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryCounter(u32);

impl QueryCounter {
    pub fn get(self) -> u32 {
        self.0
    }
}

/// LLM(p): asks the backend and counts the delivery.
pub fn query(backend: &mut dyn SuggestionBackend, prompt: &PromptBundle, counter: &mut QueryCounter) -> Result<SuggestionResponse, BackendError> {
    let raw = backend.complete(prompt)?;
    counter.0 += 1;
    Ok(SuggestionResponse::from_raw(raw))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteSettings {
    /// Full URL of an OpenAI-style chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable that holds the bearer token.
    pub api_key_env: String,
    pub max_attempts: u32,
    pub backoff: Duration,
    pub request_timeout: Duration,
}

impl RemoteSettings {
    /// Endpoint and model from `FEAS_ENDPOINT`/`FEAS_MODEL` unless given.
    pub fn from_env(endpoint: Option<String>, model: Option<String>) -> Result<Self, BackendError> {
        let endpoint = endpoint
            .or_else(|| std::env::var(ENDPOINT_ENV).ok())
            .ok_or_else(|| BackendError::Config(format!("endpoint (--endpoint or {ENDPOINT_ENV})")))?;
        let model = model
            .or_else(|| std::env::var(MODEL_ENV).ok())
            .ok_or_else(|| BackendError::Config(format!("model (--model or {MODEL_ENV})")))?;
        Ok(RemoteSettings {
            endpoint,
            model,
            ..RemoteSettings::default()
        })
    }
}

impl Default for RemoteSettings {
    fn default() -> Self {
        RemoteSettings {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: API_KEY_ENV.to_string(),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            request_timeout: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Remote(RemoteSettings),
    /// Replays `<path>`; in a benchmark `<path>` is a directory of
    /// per-run transcripts.
    Replay { transcript: PathBuf },
    /// Scripted table; in a benchmark, `None` means each problem's sibling
    /// `<name>.script.toml`.
    Scripted { script: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub temperature: f64,
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        BackendConfig { kind, temperature: 0.0 }
    }
}

pub struct RemoteBackend {
    settings: RemoteSettings,
    temperature: f64,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl RemoteBackend {
    pub fn new(settings: RemoteSettings, temperature: f64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.request_timeout))
            .build()
            .into();
        let api_key = std::env::var(&settings.api_key_env).ok();
        RemoteBackend {
            settings,
            temperature,
            agent,
            api_key,
        }
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(status)) if status == 429 || status >= 500 => {
                return Err(Attempt::Retry(format!("HTTP {status}")))
            }
            Err(ureq::Error::StatusCode(status)) => return Err(Attempt::Fatal(BackendError::Http { status })),
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(BackendError::Malformed(e.to_string())))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(BackendError::Malformed("no choices[0].message.content".into())))
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl SuggestionBackend for RemoteBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.settings.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        });
        let attempts = self.settings.max_attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                std::thread::sleep(self.settings.backoff * 2u32.pow(i - 1));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("suggestion request failed (attempt {}/{attempts}): {msg}", i + 1);
                    last = msg;
                }
            }
        }
        Err(BackendError::Transport { attempts, message: last })
    }
}

/// Scripted responses keyed by canonical state key, by prover state id, or
/// by `*` for any state. The n-th query at a key gets the n-th response; the
/// last one repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptTable {
    pub responses: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct ScriptFile {
    #[serde(default)]
    responses: BTreeMap<String, Vec<String>>,
    /// Per-run overrides, keyed by 1-based run number.
    #[serde(default)]
    runs: BTreeMap<String, ScriptTable>,
}

impl ScriptTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, responses: &[&str]) -> Self {
        self.responses
            .insert(key.into(), responses.iter().map(|s| s.to_string()).collect());
        self
    }

    /// Loads a script file, applying the overrides for `run` (1-based).
    pub fn load(path: &Path, run: u32) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, run).map_err(|message| BackendError::Format {
            what: format!("script {}", path.display()),
            message,
        })
    }

    pub fn parse(text: &str, run: u32) -> Result<Self, String> {
        let file: ScriptFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut responses = file.responses;
        if let Some(over) = file.runs.get(&run.to_string()) {
            for (k, v) in &over.responses {
                responses.insert(k.clone(), v.clone());
            }
        }
        Ok(ScriptTable { responses })
    }
}

/// Script key that matches every state.
pub const WILDCARD: &str = "*";

pub struct ScriptedBackend {
    table: ScriptTable,
    served: HashMap<String, usize>,
}

impl ScriptedBackend {
    pub fn new(table: ScriptTable) -> Self {
        ScriptedBackend {
            table,
            served: HashMap::new(),
        }
    }
}

impl SuggestionBackend for ScriptedBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let candidates = [prompt.state_key.as_str(), prompt.state_id.as_str(), WILDCARD];
        let (key, list) = candidates
            .iter()
            .find_map(|k| self.table.responses.get(*k).filter(|l| !l.is_empty()).map(|l| (*k, l)))
            .ok_or_else(|| BackendError::MissingScript(prompt.state_id.to_string()))?;
        let n = self.served.entry(key.to_string()).or_insert(0);
        let text = list[(*n).min(list.len() - 1)].clone();
        *n += 1;
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: usize,
    pub prompt_digest: String,
    pub response: String,
}

/// Reads a JSON-lines transcript.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, BackendError> {
    let file = File::open(path).map_err(|e| BackendError::io(format!("opening {}", path.display()), e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BackendError::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TranscriptRecord = serde_json::from_str(&line).map_err(|e| BackendError::Format {
            what: format!("transcript {} line {}", path.display(), n + 1),
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Serves recorded responses in order, checking each prompt digest.
pub struct ReplayBackend {
    records: Vec<TranscriptRecord>,
    position: usize,
}

impl ReplayBackend {
    pub fn new(records: Vec<TranscriptRecord>) -> Self {
        ReplayBackend { records, position: 0 }
    }

    pub fn open(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(read_transcript(path)?))
    }
}

impl SuggestionBackend for ReplayBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let rec = self
            .records
            .get(self.position)
            .ok_or(BackendError::TranscriptExhausted(self.records.len()))?;
        let digest = prompt.digest();
        if rec.prompt_digest != digest {
            return Err(BackendError::TranscriptDiverged {
                index: self.position,
                recorded: rec.prompt_digest.clone(),
                actual: digest,
            });
        }
        self.position += 1;
        Ok(rec.response.clone())
    }
}

/// Wraps a backend and appends every delivered response to a transcript.
pub struct RecordingBackend<B> {
    inner: B,
    out: File,
    seq: usize,
}

impl<B: SuggestionBackend> RecordingBackend<B> {
    /// Creates (truncating) the transcript at `path`.
    pub fn create(inner: B, path: &Path) -> Result<Self, BackendError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| BackendError::io(format!("creating {}", dir.display()), e))?;
        }
        let out = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| BackendError::io(format!("creating {}", path.display()), e))?;
        Ok(RecordingBackend { inner, out, seq: 0 })
    }
}

impl<B: SuggestionBackend> SuggestionBackend for RecordingBackend<B> {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let response = self.inner.complete(prompt)?;
        let rec = TranscriptRecord {
            seq: self.seq,
            prompt_digest: prompt.digest(),
            response: response.clone(),
        };
        self.seq += 1;
        let line = serde_json::to_string(&rec).expect("transcript records serialize");
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| BackendError::io("writing transcript", e))?;
        Ok(response)
    }
}
