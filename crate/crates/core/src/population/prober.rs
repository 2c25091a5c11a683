//! Sources of completions: remote HTTP endpoints, recorded caches, and in-process stubs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::cache::CompletionCache;
use super::model::{ModelSpec, Provider, SamplingParams};
use crate::error::{Error, Result};
use crate::genome::Gene;

/// Identifies one probe of one gene. Stateless providers ignore it; seeded
/// providers derive their randomness from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw {
    pub salt: u64,
    pub index: u64,
}

/// Anything that can complete a gene context.
pub trait Prober: Send + Sync {
    /// Returns the raw completion (context excluded).
    fn probe(&self, gene: &Gene, draw: Draw) -> Result<String>;

    /// Requests actually sent over the network or to the backing source.
    fn requests_issued(&self) -> u64 {
        0
    }
}

impl<P: Prober + ?Sized> Prober for Box<P> {
    fn probe(&self, gene: &Gene, draw: Draw) -> Result<String> {
        (**self).probe(gene, draw)
    }

    fn requests_issued(&self) -> u64 {
        (**self).requests_issued()
    }
}

/// Returns the same completion for every draw of a gene.
#[derive(Debug, Default)]
pub struct FixedProber {
    by_gene: HashMap<String, String>,
    fallback: Option<String>,
    calls: AtomicU64,
}

impl FixedProber {
    pub fn new(by_gene: HashMap<String, String>) -> Self {
        FixedProber {
            by_gene,
            ..Default::default()
        }
    }

    pub fn constant(text: impl Into<String>) -> Self {
        FixedProber {
            fallback: Some(text.into()),
            ..Default::default()
        }
    }
}

impl Prober for FixedProber {
    fn probe(&self, gene: &Gene, _draw: Draw) -> Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.by_gene
            .get(&gene.id)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| Error::Probe(format!("no completion defined for gene {}", gene.id)))
    }

    fn requests_issued(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
            timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << attempt.min(16));
        let capped = exp.min(self.max_delay);
        // full jitter in [capped/2, capped]
        let half = capped / 2;
        let jitter = rand::rng().random_range(0..=half.as_micros().max(1) as u64);
        half + Duration::from_micros(jitter)
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

/// POSTs `{prompt, max_tokens, temperature, top_p}` to a completion endpoint.
pub struct HttpProber {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
    remote_model: Option<String>,
    sampling: SamplingParams,
    policy: RetryPolicy,
    requests: AtomicU64,
    retries: AtomicU64,
}

impl HttpProber {
    /// Fails with a configuration error when `auth_env` names an unset variable.
    pub fn new(spec: &ModelSpec, policy: RetryPolicy) -> Result<Self> {
        let endpoint = spec
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config(format!("model {} has no endpoint", spec.id)))?;
        let token = match &spec.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!(
                    "model {}: environment variable {var} is not set",
                    spec.id
                ))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProber {
            agent,
            endpoint,
            token,
            remote_model: spec.remote_model.clone(),
            sampling: spec.sampling.clone(),
            policy,
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        let mut body = json!({
            "prompt": prompt,
            "max_tokens": self.sampling.max_new_tokens,
            "temperature": self.sampling.temperature,
            "top_p": self.sampling.top_p,
        });
        if let Some(m) = &self.remote_model {
            body["model"] = Value::String(m.clone());
        }
        body
    }

    pub fn retries_performed(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &str) -> Attempt {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        match status {
            200..=299 => match serde_json::from_str::<Value>(&text)
                .ok()
                .as_ref()
                .and_then(completion_text)
            {
                Some(c) => Attempt::Done(c),
                None => Attempt::Fatal(format!(
                    "unrecognised response shape: {}",
                    truncate(&text, 200)
                )),
            },
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Fatal(format!("HTTP {status}: {}", truncate(&text, 200))),
        }
    }
}

fn truncate(s: &str, chars: usize) -> &str {
    match s.char_indices().nth(chars) {
        Some((b, _)) => &s[..b],
        None => s,
    }
}

impl Prober for HttpProber {
    fn probe(&self, gene: &Gene, _draw: Draw) -> Result<String> {
        let body = self.request_body(&gene.context).to_string();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => {
                    if attempt > 0 {
                        log::info!(
                            "{}: gene {} succeeded after {attempt} retries",
                            self.endpoint,
                            gene.id
                        );
                    }
                    return Ok(text);
                }
                Attempt::Fatal(msg) => return Err(Error::Probe(msg)),
                Attempt::Retry(msg) if attempt >= self.policy.retries => {
                    return Err(Error::Probe(format!(
                        "{msg} (gave up after {} attempts)",
                        attempt + 1
                    )))
                }
                Attempt::Retry(msg) => {
                    let wait = self.policy.backoff(attempt);
                    log::warn!(
                        "{}: {msg}; retry {} in {wait:?}",
                        self.endpoint,
                        attempt + 1
                    );
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }

    fn requests_issued(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

/// Maps the common provider response shapes to plain completion text.
pub fn completion_text(v: &Value) -> Option<String> {
    if let Some(arr) = v.as_array() {
        return arr.first().and_then(completion_text);
    }
    if let Some(choice) = v.get("choices").and_then(|c| c.get(0)) {
        if let Some(t) = choice.get("text").and_then(Value::as_str) {
            return Some(t.to_string());
        }
        if let Some(t) = choice.pointer("/message/content").and_then(Value::as_str) {
            return Some(t.to_string());
        }
    }
    if let Some(tokens) = v.get("tokens").and_then(Value::as_array) {
        return tokens
            .iter()
            .map(|t| t.as_str())
            .collect::<Option<Vec<_>>>()
            .map(|p| p.concat());
    }
    if let Some(blocks) = v.get("content").and_then(Value::as_array) {
        return Some(
            blocks
                .iter()
                .filter_map(|b| b.get("text").and_then(Value::as_str))
                .collect(),
        );
    }
    ["completion", "generated_text", "text", "output", "response"]
        .iter()
        .find_map(|k| v.get(k).and_then(Value::as_str))
        .map(str::to_string)
}

/// Serves completions recorded in a completion cache file.
pub struct ReplayProber {
    cache: CompletionCache,
    path: PathBuf,
    reads: AtomicU64,
}

impl ReplayProber {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(ReplayProber {
            cache: CompletionCache::read(path)?,
            path: path.to_path_buf(),
            reads: AtomicU64::new(0),
        })
    }
}

impl Prober for ReplayProber {
    fn probe(&self, gene: &Gene, draw: Draw) -> Result<String> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.cache
            .get(gene, draw.index)
            .map(str::to_string)
            .ok_or_else(|| {
                Error::Probe(format!(
                    "{}: no recorded completion for gene {} draw {}",
                    self.path.display(),
                    gene.id,
                    draw.index
                ))
            })
    }

    fn requests_issued(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }
}

/// Instantiates the prober described by `spec`. Relative file endpoints
/// resolve against `base_dir`. Credentials are checked here, before any request.
pub fn connect(spec: &ModelSpec, base_dir: &Path, policy: RetryPolicy) -> Result<Box<dyn Prober>> {
    spec.validate()?;
    let file = |spec: &ModelSpec| -> Result<PathBuf> {
        let ep = spec
            .endpoint
            .as_deref()
            .ok_or_else(|| Error::Config(format!("model {} needs an endpoint file", spec.id)))?;
        Ok(base_dir.join(ep))
    };
    Ok(match spec.provider {
        Provider::Http => Box::new(HttpProber::new(spec, policy)?),
        Provider::Replay => Box::new(ReplayProber::open(&file(spec)?)?),
        Provider::Synthetic => Box::new(crate::synthlab::SyntheticModel::load(&file(spec)?)?),
    })
}

/// Probes a single gene once.
pub fn probe_once(prober: &dyn Prober, gene: &Gene) -> Result<String> {
    prober.probe(gene, Draw { salt: 0, index: 0 })
}
