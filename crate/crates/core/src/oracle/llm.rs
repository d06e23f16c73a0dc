use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::parse::{parse_predicates, ParsePolicy};
use super::prompt::{build_prompt_stage1, build_prompt_stage2, Prompt};
use super::{DecompositionOracle, OracleFailure, OracleRequest, OracleResponse, ResponseSource};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed completion: {0}")]
    Malformed(String),
    #[error("missing credential: set {0}")]
    MissingCredential(&'static str),
}

impl TransportError {
    fn is_transient(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Network(_) => true,
            TransportError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Sends one single-turn conversation and returns the assistant text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&self, prompt: &Prompt) -> Result<String, TransportError> {
        (**self).complete(prompt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlmConfig {
    pub api_key: String,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub retries: u32,
}

impl LlmConfig {
    pub const KEY_VAR: &'static str = "OPENAI_API_KEY";

    /// Reads `OPENAI_API_KEY`, `OPENAI_BASE_URL`, `OPENAI_MODEL` and
    /// `OPENAI_TEMPERATURE`.
    pub fn from_env() -> Result<Self, TransportError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, TransportError> {
        let api_key = get(Self::KEY_VAR)
            .filter(|k| !k.is_empty())
            .ok_or(TransportError::MissingCredential(Self::KEY_VAR))?;
        let temperature = match get("OPENAI_TEMPERATURE") {
            Some(t) => t
                .parse()
                .map_err(|_| TransportError::Malformed(format!("OPENAI_TEMPERATURE={t}")))?,
            None => 1.0,
        };
        Ok(LlmConfig {
            api_key,
            base_url: get("OPENAI_BASE_URL").unwrap_or_else(|| "https://api.openai.com/v1".into()),
            model: get("OPENAI_MODEL").unwrap_or_else(|| "gpt-4-turbo".into()),
            temperature,
            timeout: Duration::from_secs(120),
            retries: 3,
        })
    }
}

/// OpenAI-compatible `chat/completions` client.
pub struct HttpTransport {
    agent: ureq::Agent,
    config: LlmConfig,
}

impl HttpTransport {
    pub fn new(config: LlmConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        HttpTransport { agent, config }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, prompt: &Prompt) -> Result<String, TransportError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let resp = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body);
        let resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                return Err(TransportError::Http {
                    status,
                    body: r.into_string().unwrap_or_default(),
                })
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                return Err(if msg.contains("timed out") || msg.contains("Timeout") {
                    TransportError::Timeout
                } else {
                    TransportError::Network(msg)
                });
            }
        };
        let value: Value = resp
            .into_json()
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError::Malformed("no choices[0].message.content".into()))
    }
}

/// Retries transient failures (timeouts, network errors, 429, 5xx) with
/// exponential backoff.
pub struct RetryingTransport<T> {
    inner: T,
    retries: u32,
    backoff: Duration,
}

impl<T: ChatTransport> RetryingTransport<T> {
    pub fn new(inner: T, retries: u32, backoff: Duration) -> Self {
        RetryingTransport {
            inner,
            retries,
            backoff,
        }
    }
}

impl<T: ChatTransport> ChatTransport for RetryingTransport<T> {
    fn complete(&self, prompt: &Prompt) -> Result<String, TransportError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.inner.complete(prompt) {
                Err(e) if e.is_transient() && attempt < self.retries => {
                    attempt += 1;
                    tracing::warn!(attempt, "transient transport error: {e}");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                other => return other,
            }
        }
    }
}

/// The two-stage chat oracle. Stage 2 is a fresh single-turn conversation
/// that embeds the stage-1 answer.
pub struct LlmOracle<T> {
    transport: T,
    policy: ParsePolicy,
    label: String,
}

impl<T: ChatTransport> LlmOracle<T> {
    pub fn new(transport: T, label: impl Into<String>) -> Self {
        LlmOracle {
            transport,
            policy: ParsePolicy::Strict,
            label: label.into(),
        }
    }

    pub fn with_policy(mut self, policy: ParsePolicy) -> Self {
        self.policy = policy;
        self
    }
}

impl LlmOracle<RetryingTransport<HttpTransport>> {
    pub fn from_config(config: LlmConfig) -> Self {
        let retries = config.retries;
        let label = format!("live:{}", config.model);
        LlmOracle::new(
            RetryingTransport::new(
                HttpTransport::new(config),
                retries,
                Duration::from_millis(500),
            ),
            label,
        )
    }
}

impl<T: ChatTransport> DecompositionOracle for LlmOracle<T> {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        let transport = |e: TransportError| OracleFailure::Transport(e.to_string());
        let p1 = build_prompt_stage1(request);
        let r1 = self.transport.complete(&p1).map_err(transport)?;
        let p2 = build_prompt_stage2(request, &r1);
        let r2 = self.transport.complete(&p2).map_err(transport)?;
        let parsed = parse_predicates(&r2, request.domain, self.policy)
            .map_err(OracleFailure::Unparseable)?;
        if !parsed.report.rejected.is_empty() {
            tracing::debug!("salvaged oracle response: {}", parsed.report);
        }
        Ok(OracleResponse {
            tasks: parsed.tasks,
            prompts: (p1.to_text(), p2.to_text()),
            raw: (r1, r2),
            source: ResponseSource::Live,
        })
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
