//! Chat-completion providers: HTTP with retries, and a deterministic mock.

use std::sync::{Condvar, LazyLock, Mutex};
use std::thread;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::sha256_hex;
use super::TokenUsage;
use crate::error::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "GRAPHXAIN_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry waits this long; each further retry doubles it.
    pub backoff_base_ms: u64,
    /// Upper bound on concurrent requests through one provider.
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: 0.0,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_base_ms: 500,
            max_in_flight: 2,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::Config("provider timeout must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        if self.api_key_env.is_empty() {
            return Err(Error::Config("api_key_env is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatMessage {
    pub role: &'static str,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(model: &str, system: &str, user: &str, temperature: f64) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: system.to_string(),
                },
                ChatMessage {
                    role: "user",
                    content: user.to_string(),
                },
            ],
            temperature,
        }
    }

    /// The user message, i.e. the prompt.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub retry_count: u32,
}

pub trait Provider: Send + Sync {
    /// Short provider name recorded in results.
    fn name(&self) -> &str;
    fn model_name(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<Completion>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// One HTTP POST. `Err` means no response was received.
pub trait ChatTransport: Send + Sync {
    fn post(
        &self,
        url: &str,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<HttpResponse, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self { client })
    }
}

impl ChatTransport for ReqwestTransport {
    fn post(
        &self,
        url: &str,
        bearer: &str,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<HttpResponse, String> {
        let resp = self
            .client
            .post(url)
            .bearer_auth(bearer)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    active: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct GatePass<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            active: Mutex::new(0),
            freed: Condvar::new(),
            limit,
        }
    }

    fn enter(&self) -> GatePass<'_> {
        let mut active = self.active.lock().unwrap_or_else(|p| p.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|p| p.into_inner());
        }
        *active += 1;
        GatePass(self)
    }
}

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|p| p.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    api_key: String,
    transport: Box<dyn ChatTransport>,
    gate: Gate,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::Credential {
                var: config.api_key_env.clone(),
            })?;
        Self::with_transport(config, key, Box::new(ReqwestTransport::new()?))
    }

    pub fn with_transport(config: ProviderConfig, api_key: String, transport: Box<dyn ChatTransport>) -> Result<Self> {
        config.validate()?;
        let gate = Gate::new(config.max_in_flight);
        Ok(Self {
            config,
            api_key,
            transport,
            gate,
        })
    }

    fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.config.backoff_base_ms.saturating_mul(1u64 << retry.min(20)))
    }
}

fn parse_completion(body: &str) -> Result<(String, Option<TokenUsage>)> {
    let v: Value = serde_json::from_str(body).map_err(|e| Error::Provider(format!("response is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Provider("response has no choices[0].message.content".into()))?;
    if text.trim().is_empty() {
        return Err(Error::Provider("empty completion".into()));
    }
    let usage = v.get("usage").map(|u| TokenUsage {
        prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64),
        completion_tokens: u.get("completion_tokens").and_then(Value::as_u64),
        total_tokens: u.get("total_tokens").and_then(Value::as_u64),
    });
    Ok((text.to_string(), usage))
}

fn snippet(body: &str) -> String {
    body.chars().take(200).collect()
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion> {
        let _pass = self.gate.enter();
        let body = json!(request);
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff(attempt - 1));
            }
            match self
                .transport
                .post(&self.config.endpoint_url, &self.api_key, &body, timeout)
            {
                Err(e) => last = e,
                Ok(r) if r.status == 401 || r.status == 403 => {
                    return Err(Error::Credential {
                        var: self.config.api_key_env.clone(),
                    });
                }
                Ok(r) if r.status == 429 || r.status >= 500 => {
                    last = format!("HTTP {}: {}", r.status, snippet(&r.body))
                }
                Ok(r) if !(200..300).contains(&r.status) => {
                    return Err(Error::Provider(format!("HTTP {}: {}", r.status, snippet(&r.body))));
                }
                Ok(r) => {
                    let (text, usage) = parse_completion(&r.body)?;
                    return Ok(Completion {
                        text,
                        usage,
                        retry_count: attempt,
                    });
                }
            }
        }
        Err(Error::Transport {
            attempts,
            message: last,
        })
    }
}

/// Offline provider. Its text is a function of the prompt alone: facts are
/// copied from the prompt verbatim and the digest picks the wording.
#[derive(Debug, Clone, Default)]
pub struct MockProvider;

pub const MOCK_MODEL_NAME: &str = "mock-narrator-1";

static TARGET_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^Target node: (.+)$").expect("static regex"));
static PREDICTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^Predicted class: (.+) \(probability (\S+)\)$").expect("static regex"));
static EDGE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^- (\S+) -- (\S+): (\S+)$").expect("static regex"));
static ITEM_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^- ([^:\n]+): (\S+)$").expect("static regex"));

const INTROS: [&str; 3] = [
    "This is the story of node",
    "Consider node",
    "Our account centres on node",
];
const CONCLUSIONS: [&str; 3] = [
    "Taken together, these features and connections are what the model relies on when it judges",
    "In the end, the prediction rests on this combination of the node's own profile and its neighbourhood, which is how the model arrives at its view of",
    "So the picture the model forms comes from both what the node is and whom it is linked to, and that picture settles the outcome for",
];

fn section<'a>(prompt: &'a str, heading: &str) -> &'a str {
    let Some(start) = prompt.find(heading) else { return "" };
    let rest = &prompt[start + heading.len()..];
    let end = rest.find("\n## ").unwrap_or(rest.len());
    &rest[..end]
}

impl MockProvider {
    pub fn narrate(prompt: &str) -> Result<String> {
        let digest = sha256_hex(prompt.as_bytes());
        let pick = |i: usize, n: usize| usize::from_str_radix(&digest[2 * i..2 * i + 2], 16).expect("hex") % n;

        let target = TARGET_LINE
            .captures(prompt)
            .map(|c| c[1].trim().to_string())
            .ok_or_else(|| Error::Provider("mock provider found no target node in the prompt".into()))?;
        let (label, prob) = PREDICTION_LINE
            .captures(prompt)
            .map(|c| (c[1].to_string(), c[2].to_string()))
            .ok_or_else(|| Error::Provider("mock provider found no prediction in the prompt".into()))?;
        let features: Vec<(String, String)> = ITEM_LINE
            .captures_iter(section(prompt, "## Feature importance"))
            .map(|c| (c[1].to_string(), c[2].to_string()))
            .collect();
        let edges: Vec<(String, String, String)> = EDGE_LINE
            .captures_iter(section(prompt, "## Explanatory subgraph"))
            .map(|c| (c[1].to_string(), c[2].to_string(), c[3].to_string()))
            .collect();

        let mut paragraphs = vec![format!(
            "{} {target}. The model places it in the class {label}, with a predicted probability of {prob}.",
            INTROS[pick(0, INTROS.len())]
        )];
        paragraphs.push(match features.as_slice() {
            [] => "The explanation does not single out any feature of the node.".to_string(),
            [(f, w)] => format!("The feature that matters most is {f}, with an importance of {w}."),
            [(f, w), (g, v), ..] => format!(
                "The feature that matters most is {f}, with an importance of {w}, and {g} follows with {v}. \
                 These characteristics of {target} carry the weight of the decision."
            ),
        });
        paragraphs.push(if edges.is_empty() {
            format!("No connection survives in the explanatory subgraph, so the story of {target} is told by its own features.")
        } else {
            let links: Vec<String> = edges
                .iter()
                .take(3)
                .map(|(u, v, w)| format!("the link between {u} and {v} (weight {w})"))
                .collect();
            format!("Its neighbourhood matters as well: the strongest ties are {}.", links.join(", "))
        });
        paragraphs.push(format!("{} {target}.", CONCLUSIONS[pick(1, CONCLUSIONS.len())]));
        Ok(paragraphs.join("\n\n"))
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn model_name(&self) -> &str {
        MOCK_MODEL_NAME
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion> {
        Ok(Completion {
            text: Self::narrate(request.prompt())?,
            usage: None,
            retry_count: 0,
        })
    }
}
