//! Vote sources feeding the certificate: in-memory sequences, JSONL replay
//! files, and a generic HTTP completion-endpoint sampler with deterministic
//! answer extraction and a transcript cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Label assigned when no boxed answer can be extracted.
pub const MISSING_ANSWER: &str = "∅";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("jsonl line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("http request failed after {attempts} attempts: {message}")]
    Http { attempts: u32, message: String },
    #[error("response field {0:?} missing or not a string")]
    ResponseField(String),
    #[error("environment variable {0} not set")]
    MissingToken(String),
}

/// A transcript with its deterministically extracted label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalAnswer {
    pub raw_text: String,
    pub label: String,
}

/// Extracts the content of the last balanced `\boxed{...}` group, trims it,
/// and collapses internal whitespace runs to single spaces. Missing or
/// unbalanced groups yield the `∅` sentinel, never an error.
pub fn canonicalize(raw_text: &str) -> CanonicalAnswer {
    let label = last_boxed_group(raw_text)
        .map(normalize_whitespace)
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| MISSING_ANSWER.to_string());
    CanonicalAnswer {
        raw_text: raw_text.to_string(),
        label,
    }
}

fn last_boxed_group(text: &str) -> Option<String> {
    const OPEN: &str = "\\boxed{";
    let mut found = None;
    let mut from = 0;
    while let Some(rel) = text[from..].find(OPEN) {
        let content_start = from + rel + OPEN.len();
        // Brace matching, not greedy scanning: nested groups stay intact.
        let mut depth = 1usize;
        let mut end = None;
        for (i, ch) in text[content_start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(content_start + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(e) => {
                found = Some(text[content_start..e].to_string());
                from = e + 1;
            }
            None => break, // unbalanced: keep the last balanced group, if any
        }
    }
    found
}

fn normalize_whitespace(s: String) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Configuration of the HTTP completion sampler. Each call POSTs
/// `{"prompt": <template>, ...decode_params}` to the endpoint and extracts
/// the completion text at `response_text_path` (a JSON pointer such as
/// `/choices/0/text`). A bearer token is read from the environment variable
/// named in `auth_env`, if any. With `cache_dir` set, transcripts and labels
/// are stored one file per sample, addressed by prompt hash and sample
/// index, and replayed on later runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSamplerConfig {
    pub endpoint_url: String,
    pub prompt_template: String,
    #[serde(default)]
    pub decode_params: BTreeMap<String, serde_json::Value>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_text_path")]
    pub response_text_path: String,
    #[serde(default)]
    pub auth_env: Option<String>,
}

fn default_text_path() -> String {
    "/text".to_string()
}

/// Tagged description of where votes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VoteSourceSpec {
    Memory { labels: Vec<String> },
    JsonlFile { path: PathBuf },
    HttpSampler(HttpSamplerConfig),
}

/// A sequential vote stream. Labels are delivered in acquisition order; the
/// certificate's predictability depends on it.
pub enum VoteSource {
    Memory {
        labels: std::vec::IntoIter<String>,
    },
    Jsonl {
        lines: std::io::Lines<BufReader<fs::File>>,
        line_no: usize,
    },
    Http(HttpSampler),
}

impl VoteSource {
    pub fn open(spec: VoteSourceSpec) -> Result<Self, IngestError> {
        match spec {
            VoteSourceSpec::Memory { labels } => Ok(VoteSource::Memory {
                labels: labels.into_iter(),
            }),
            VoteSourceSpec::JsonlFile { path } => {
                let file = fs::File::open(&path).map_err(|source| IngestError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(VoteSource::Jsonl {
                    lines: BufReader::new(file).lines(),
                    line_no: 0,
                })
            }
            VoteSourceSpec::HttpSampler(config) => Ok(VoteSource::Http(HttpSampler::new(config)?)),
        }
    }

    /// The next label, `None` at end of stream.
    pub fn next_vote(&mut self) -> Option<Result<String, IngestError>> {
        match self {
            VoteSource::Memory { labels } => labels.next().map(Ok),
            VoteSource::Jsonl { lines, line_no } => {
                let line = lines.next()?;
                *line_no += 1;
                Some(parse_jsonl_line(line, *line_no))
            }
            VoteSource::Http(sampler) => Some(sampler.sample_next()),
        }
    }
}

impl Iterator for VoteSource {
    type Item = Result<String, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_vote()
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    answer: String,
    #[allow(dead_code)]
    #[serde(default)]
    raw: Option<String>,
}

fn parse_jsonl_line(
    line: Result<String, std::io::Error>,
    line_no: usize,
) -> Result<String, IngestError> {
    let line = line.map_err(|e| IngestError::Jsonl {
        line: line_no,
        message: e.to_string(),
    })?;
    let record: JsonlRecord = serde_json::from_str(&line).map_err(|e| IngestError::Jsonl {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(record.answer)
}

/// Issues one completion request per vote, canonicalizes the transcript, and
/// optionally caches (transcript, label) per sample index.
pub struct HttpSampler {
    config: HttpSamplerConfig,
    client: reqwest::blocking::Client,
    sample_index: u64,
    prompt_hash: String,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    raw: String,
    label: String,
}

impl HttpSampler {
    pub fn new(config: HttpSamplerConfig) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| IngestError::Http {
                attempts: 0,
                message: e.to_string(),
            })?;
        let prompt_hash = hex_prefix(&config.prompt_template);
        Ok(HttpSampler {
            config,
            client,
            sample_index: 0,
            prompt_hash,
        })
    }

    fn cache_path(&self, index: u64) -> Option<PathBuf> {
        self.config
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{}-{index:06}.json", self.prompt_hash)))
    }

    /// Draws the next sample: cache hit, or one POST with retries and
    /// exponential backoff.
    pub fn sample_next(&mut self) -> Result<String, IngestError> {
        let index = self.sample_index;
        self.sample_index += 1;

        if let Some(path) = self.cache_path(index) {
            if let Ok(bytes) = fs::read(&path) {
                if let Ok(entry) = serde_json::from_slice::<CacheEntry>(&bytes) {
                    return Ok(entry.label);
                }
            }
        }

        let raw = self.fetch_completion()?;
        let answer = canonicalize(&raw);
        if let Some(path) = self.cache_path(index) {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|source| IngestError::Io {
                    path: dir.to_path_buf(),
                    source,
                })?;
            }
            let entry = CacheEntry {
                raw: answer.raw_text.clone(),
                label: answer.label.clone(),
            };
            fs::write(&path, serde_json::to_vec(&entry).expect("cache entry serializes"))
                .map_err(|source| IngestError::Io { path, source })?;
        }
        Ok(answer.label)
    }

    fn fetch_completion(&self) -> Result<String, IngestError> {
        let mut body = serde_json::Map::new();
        body.insert(
            "prompt".to_string(),
            serde_json::Value::String(self.config.prompt_template.clone()),
        );
        for (k, v) in &self.config.decode_params {
            body.insert(k.clone(), v.clone());
        }
        let token = match &self.config.auth_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| IngestError::MissingToken(var.clone()))?,
            ),
            None => None,
        };

        let mut last_err = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100u64 << (attempt - 1).min(6)));
            }
            let mut req = self.client.post(&self.config.endpoint_url).json(&body);
            if let Some(token) = &token {
                req = req.bearer_auth(token);
            }
            let result = req.send().and_then(|resp| {
                resp.error_for_status()
                    .and_then(|ok| ok.json::<serde_json::Value>())
            });
            match result {
                Ok(value) => {
                    let text = value
                        .pointer(&self.config.response_text_path)
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| {
                            IngestError::ResponseField(self.config.response_text_path.clone())
                        })?;
                    return Ok(text.to_string());
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(IngestError::Http {
            attempts,
            message: last_err,
        })
    }
}

fn hex_prefix(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a vote-source spec from the CLI syntax `memory:a,b,c`,
/// `jsonl:path`, or `http:config.json`.
pub fn parse_source_arg(arg: &str) -> Result<VoteSourceSpec, String> {
    if let Some(rest) = arg.strip_prefix("memory:") {
        let labels = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(|s| s.to_string()).collect()
        };
        return Ok(VoteSourceSpec::Memory { labels });
    }
    if let Some(path) = arg.strip_prefix("jsonl:") {
        return Ok(VoteSourceSpec::JsonlFile {
            path: PathBuf::from(path),
        });
    }
    if let Some(path) = arg.strip_prefix("http:") {
        let bytes = fs::read(path).map_err(|e| format!("cannot read {path}: {e}"))?;
        let config: HttpSamplerConfig =
            serde_json::from_slice(&bytes).map_err(|e| format!("bad sampler config: {e}"))?;
        return Ok(VoteSourceSpec::HttpSampler(config));
    }
    Err(format!(
        "unknown source {arg:?}; expected memory:…, jsonl:…, or http:…"
    ))
}
