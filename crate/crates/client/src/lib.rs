//! Sends corpus inputs to a chat-completions endpoint and records the replies
//! as a predictions file that `forge eval` reads.

mod config;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use forge_core::eval::Prediction;
use forge_core::sample::InstructionSample;

pub use config::{ApiKey, EndpointConfig, RetryPolicy, Sampling};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("endpoint config: {0}")]
    Config(String),
    #[error("environment variable {0} is unset or empty")]
    MissingKey(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("endpoint refused the credentials (HTTP {status}) while answering {id}")]
    Auth { status: u16, id: String },
    #[error("could not build HTTP client: {0}")]
    Http(String),
}

impl ClientError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ClientError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Request body: one user turn carrying the sample input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: [ChatMessage<'a>; 1],
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatMessage<'a> {
    pub role: &'a str,
    pub content: &'a str,
}

pub fn request_body<'a>(cfg: &'a EndpointConfig, input: &'a str) -> ChatRequest<'a> {
    ChatRequest {
        model: &cfg.model,
        messages: [ChatMessage {
            role: "user",
            content: input,
        }],
        temperature: cfg.sampling.temperature,
        max_tokens: cfg.sampling.max_tokens,
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// First line of a predictions file: the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool_version: String,
    pub model: String,
    pub base_url: String,
    pub split: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub total: usize,
    /// Already answered in an earlier run.
    pub skipped: usize,
    pub requested: usize,
    pub failed: usize,
}

/// Where a run writes.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub predictions: PathBuf,
    /// Request/response journal; defaults to `<predictions>.log.jsonl`.
    pub log: PathBuf,
}

impl RunPaths {
    pub fn new(predictions: impl Into<PathBuf>) -> Self {
        let predictions = predictions.into();
        let mut log = predictions.clone().into_os_string();
        log.push(".log.jsonl");
        RunPaths {
            predictions,
            log: log.into(),
        }
    }
}

enum Outcome {
    Answer(String),
    /// Gave up on this sample; the run continues.
    Failed(String),
    /// Credentials rejected; the run stops.
    Auth(u16),
}

struct Attempt {
    status: Option<u16>,
    body: Option<String>,
    error: Option<String>,
    elapsed_ms: u128,
}

struct Ctx<'a> {
    http: reqwest::Client,
    cfg: &'a EndpointConfig,
    key: Option<ApiKey>,
    url: String,
}

impl Ctx<'_> {
    fn scrub(&self, s: &str) -> String {
        match &self.key {
            Some(k) => k.scrub(s),
            None => s.to_string(),
        }
    }

    async fn send(&self, body: &serde_json::Value) -> Attempt {
        let start = Instant::now();
        let mut req = self.http.post(&self.url).json(body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k.expose());
        }
        let (status, text, error) = match req.send().await {
            Ok(resp) => {
                let status = resp.status().as_u16();
                match resp.text().await {
                    Ok(t) => (Some(status), Some(t), None),
                    Err(e) => (Some(status), None, Some(e.to_string())),
                }
            }
            Err(e) => (None, None, Some(if e.is_timeout() { "request timed out".to_string() } else { e.to_string() })),
        };
        Attempt {
            status,
            body: text,
            error,
            elapsed_ms: start.elapsed().as_millis(),
        }
    }

    /// Sends one sample with retries, returning the outcome and the journal entries.
    async fn answer(&self, id: &str, input: &str) -> (Outcome, Vec<serde_json::Value>) {
        let body = serde_json::to_value(request_body(self.cfg, input)).expect("request serializes");
        let mut log = Vec::new();
        let max = self.cfg.retry.max_attempts;
        let mut last_error = String::new();
        for attempt in 1..=max {
            if attempt > 1 {
                tokio::time::sleep(self.cfg.retry.backoff(attempt)).await;
            }
            let a = self.send(&body).await;
            log.push(json!({
                "ts": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                "id": id,
                "attempt": attempt,
                "request": body,
                "status": a.status,
                "response": a.body.as_deref().map(|b| self.scrub(b)),
                "error": a.error.as_deref().map(|e| self.scrub(e)),
                "elapsed_ms": a.elapsed_ms,
            }));
            let retryable = match (a.status, &a.body) {
                (Some(s @ (401 | 403)), _) => return (Outcome::Auth(s), log),
                (Some(200..=299), Some(text)) => match serde_json::from_str::<ChatResponse>(text) {
                    Ok(r) => match r.choices.into_iter().next().and_then(|c| c.message.content) {
                        Some(content) => return (Outcome::Answer(content), log),
                        None => {
                            last_error = "response has no message content".into();
                            false
                        }
                    },
                    Err(e) => {
                        last_error = format!("unreadable response: {e}");
                        false
                    }
                },
                (Some(s), _) => {
                    last_error = format!("HTTP {s}");
                    s == 408 || s == 429 || s >= 500
                }
                (None, _) => {
                    last_error = self.scrub(a.error.as_deref().unwrap_or("request failed"));
                    true
                }
            };
            if !retryable {
                break;
            }
        }
        (Outcome::Failed(format!("{last_error} after {} attempt(s)", log.len())), log)
    }
}

/// Successful predictions from an earlier run, keyed by id.
fn previous_answers(path: &Path) -> Result<HashMap<String, Prediction>, ClientError> {
    if !path.exists() {
        return Ok(HashMap::new());
    }
    let preds = forge_core::eval::read_predictions(path).map_err(|e| match e {
        forge_core::eval::EvalError::Io { path, source } => ClientError::Io { path, source },
        e => ClientError::Malformed {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        },
    })?;
    Ok(preds
        .into_iter()
        .filter(|p| p.error.is_none())
        .map(|p| (p.id.clone(), p))
        .collect())
}

fn write_line(w: &mut impl Write, path: &Path, v: &impl Serialize) -> Result<(), ClientError> {
    serde_json::to_writer(&mut *w, v).expect("record serializes");
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| ClientError::io(path, e))
}

/// Answers every sample of `samples` not already answered in `paths.predictions`.
///
/// Replies are appended as they arrive so an interrupted run can resume; at the
/// end the file is rewritten in corpus order with one line per sample.
pub async fn run_inference(
    samples: &[InstructionSample],
    split: &str,
    cfg: &EndpointConfig,
    paths: &RunPaths,
) -> Result<RunSummary, ClientError> {
    cfg.validate()?;
    let key = cfg.resolve_key()?;
    let header = RunHeader {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        model: cfg.model.clone(),
        base_url: cfg.base_url.clone(),
        split: split.to_string(),
        temperature: cfg.sampling.temperature,
        max_tokens: cfg.sampling.max_tokens,
    };
    let out = &paths.predictions;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| ClientError::io(parent, e))?;
    }
    let mut done = previous_answers(out)?;
    done.retain(|id, _| samples.iter().any(|s| &s.id == id));
    let pending: Vec<&InstructionSample> = samples.iter().filter(|s| !done.contains_key(&s.id)).collect();
    let mut summary = RunSummary {
        total: samples.len(),
        skipped: samples.len() - pending.len(),
        ..RunSummary::default()
    };

    // journal of this run, appended to whatever an earlier run left
    let fresh = !out.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| ClientError::io(out, e))?;
    let mut journal = BufWriter::new(file);
    if fresh {
        write_line(&mut journal, out, &json!({ "_header": header }))?;
    }
    let log_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&paths.log)
        .map_err(|e| ClientError::io(&paths.log, e))?;
    let mut log = BufWriter::new(log_file);

    let http = reqwest::Client::builder()
        .timeout(cfg.timeout())
        .build()
        .map_err(|e| ClientError::Http(e.to_string()))?;
    let ctx = Ctx {
        http,
        cfg,
        key,
        url: cfg.endpoint_url(),
    };
    let mut failures: HashMap<String, Prediction> = HashMap::new();
    let mut replies = stream::iter(pending.iter().map(|s| {
        let ctx = &ctx;
        async move { (s.id.clone(), ctx.answer(&s.id, &s.input).await) }
    }))
    .buffer_unordered(cfg.max_concurrent);
    let mut auth_failure = None;
    while let Some((id, (outcome, entries))) = replies.next().await {
        for e in &entries {
            write_line(&mut log, &paths.log, e)?;
        }
        summary.requested += 1;
        let p = match outcome {
            Outcome::Answer(text) => Prediction {
                id: id.clone(),
                prediction: text,
                error: None,
            },
            Outcome::Failed(msg) => {
                summary.failed += 1;
                Prediction {
                    id: id.clone(),
                    prediction: String::new(),
                    error: Some(msg),
                }
            }
            Outcome::Auth(status) => {
                auth_failure = Some(ClientError::Auth { status, id });
                break;
            }
        };
        write_line(&mut journal, out, &p)?;
        if p.error.is_some() {
            failures.insert(id, p);
        } else {
            done.insert(id, p);
        }
    }
    drop(replies);
    drop(journal);
    if let Some(e) = auth_failure {
        return Err(e);
    }

    // final rewrite in corpus order
    let tmp = out.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(|e| ClientError::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        write_line(&mut w, &tmp, &json!({ "_header": header }))?;
        for s in samples {
            if let Some(p) = done.get(&s.id).or_else(|| failures.get(&s.id)) {
                write_line(&mut w, &tmp, p)?;
            }
        }
    }
    fs::rename(&tmp, out).map_err(|e| ClientError::io(out, e))?;
    Ok(summary)
}

/// [`run_inference`] on a private multi-threaded runtime.
pub fn run_inference_blocking(
    samples: &[InstructionSample],
    split: &str,
    cfg: &EndpointConfig,
    paths: &RunPaths,
) -> Result<RunSummary, ClientError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ClientError::Http(e.to_string()))?;
    rt.block_on(run_inference(samples, split, cfg, paths))
}
