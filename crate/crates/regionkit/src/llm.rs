//! Chat-completion client: offline prompt-batch / response files, or online
//! HTTP with bounded in-flight requests and exponential backoff.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use log::{debug, warn};
use regionkit_core::forge::{ChatMessage, PromptJob};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// One line of a prompt-batch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub job_id: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

/// One line of a response file. Exactly one of `response` / `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub job_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn batch_entries(jobs: &[PromptJob], model: &str) -> Vec<BatchEntry> {
    jobs.iter()
        .map(|j| BatchEntry {
            job_id: j.job_id.clone(),
            model: model.to_string(),
            messages: j.messages(),
        })
        .collect()
}

pub fn export_batch(path: &Path, jobs: &[PromptJob], model: &str) -> Result<()> {
    jsonl::write(path, &batch_entries(jobs, model))
}

/// Successful replies keyed by job id. A reply for an unknown job id, or a
/// job id answered twice, is an error; jobs without a reply are simply absent.
pub fn read_responses(path: &Path, known: &BTreeSet<String>) -> Result<BTreeMap<String, String>> {
    let entries: Vec<ResponseEntry> = jsonl::read(path)?;
    let mut out = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for e in entries {
        if !known.contains(&e.job_id) {
            return Err(Error::format(path, format!("response for unknown job id {:?}", e.job_id)));
        }
        if !seen.insert(e.job_id.clone()) {
            return Err(Error::format(path, format!("job id {:?} answered twice", e.job_id)));
        }
        if let Some(r) = e.response {
            out.insert(e.job_id, r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub timeout_secs: u64,
    pub temperature: Option<f64>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_in_flight: 4,
            max_retries: 3,
            base_delay_ms: 500,
            timeout_secs: 120,
            temperature: None,
        }
    }
}

pub struct LlmClient {
    config: ClientConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

enum Attempt {
    Done(String),
    Retry(String, Option<Duration>),
    Fatal(String),
}

impl LlmClient {
    /// Reads the credential from `config.api_key_env`; a missing variable
    /// means requests go out unauthenticated.
    pub fn new(config: ClientConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Self {
            config,
            api_key,
            agent,
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Attempt {
        let body = ChatRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
        };
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}"), None),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            let wait = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Attempt::Retry(format!("status {status}"), wait);
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(format!("status {status}: {}", text.chars().take(200).collect::<String>()));
        }
        match resp.body_mut().read_json::<ChatResponse>() {
            Ok(r) => match r.choices.into_iter().next() {
                Some(c) => Attempt::Done(c.message.content),
                None => Attempt::Fatal("response has no choices".into()),
            },
            Err(e) => Attempt::Fatal(format!("unreadable response: {e}")),
        }
    }

    /// One request with up to `max_retries` retries on 429, 5xx and transport
    /// errors, sleeping `base_delay × 2^attempt` (or `Retry-After` if longer).
    pub fn complete(&self, messages: &[ChatMessage]) -> std::result::Result<String, String> {
        let mut attempt = 0u32;
        loop {
            match self.attempt(messages) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e, _) if attempt >= self.config.max_retries => {
                    return Err(format!("{e} after {} retries", attempt))
                }
                Attempt::Retry(e, hint) => {
                    let backoff = Duration::from_millis(self.config.base_delay_ms.saturating_mul(1 << attempt.min(16)));
                    let wait = hint.map_or(backoff, |h| h.max(backoff));
                    debug!("retrying after {e}; sleeping {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }

    /// Runs every request with at most `max_in_flight` concurrently. Results
    /// are keyed by id; a failed job carries its last error.
    pub fn submit(&self, requests: &[(String, Vec<ChatMessage>)]) -> BTreeMap<String, std::result::Result<String, String>> {
        let next = AtomicUsize::new(0);
        let results = Mutex::new(BTreeMap::new());
        let workers = self.config.max_in_flight.max(1).min(requests.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some((id, messages)) = requests.get(i) else { break };
                    let r = self.complete(messages);
                    if let Err(e) = &r {
                        warn!("job {id} failed: {e}");
                    }
                    results.lock().expect("no worker panics").insert(id.clone(), r);
                });
            }
        });
        results.into_inner().expect("no worker panics")
    }

    pub fn submit_jobs(&self, jobs: &[PromptJob]) -> Vec<ResponseEntry> {
        let requests: Vec<_> = jobs.iter().map(|j| (j.job_id.clone(), j.messages())).collect();
        self.submit(&requests)
            .into_iter()
            .map(|(job_id, r)| match r {
                Ok(text) => ResponseEntry { job_id, response: Some(text), error: None },
                Err(e) => ResponseEntry { job_id, response: None, error: Some(e) },
            })
            .collect()
    }
}
