//! Uniform access to completion- and chat-style language models.
//!
//! Every call goes through a [`Gateway`], which adds retries with exponential
//! backoff, a shared per-provider rate limit, and an append-only transcript
//! that doubles as a resume cache.

mod mock;
mod openai;
mod transcript;

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::Prompt;
use crate::util::sha256_hex;

pub use mock::{mock_provider, MockEntry, MockProvider, MockTable};
pub use openai::{ApiStyle, OpenAiProvider};
pub use transcript::{Transcript, TranscriptRecord};

/// Default cap on generated tokens; answers are short object lists.
pub const DEFAULT_MAX_TOKENS: u32 = 32;

/// Hex SHA-256 of the prompt text.
pub fn prompt_hash(text: &str) -> String {
    sha256_hex(&[text])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: Prompt,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: Prompt) -> Self {
        Self {
            prompt,
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
            stop_sequences: vec!["\n".to_string()],
        }
    }

    pub fn prompt_hash(&self) -> String {
        prompt_hash(&self.prompt.text)
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.max_tokens < 1 {
            return Err(GatewayError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

/// A provider's completion after stop-sequence truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    /// Log-probability of the first generated token, when the provider
    /// reports token log-probabilities.
    pub first_token_logprob: Option<f64>,
    pub provider: String,
    pub latency: Duration,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    /// The provider declined to answer; treated as an abstention.
    pub refused: bool,
    /// Served from the transcript rather than the provider.
    pub replayed: bool,
}

impl Generation {
    /// First-token probability, `exp(logprob)`.
    pub fn confidence(&self) -> Option<f64> {
        self.first_token_logprob.map(f64::exp)
    }
}

/// Raw provider output before truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderOutput {
    pub text: String,
    pub first_token_logprob: Option<f64>,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport: {0}")]
    Transport(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("rate limit persisted after {attempts} attempts")]
    RateLimitSaturated { attempts: u32 },
    #[error("transport error after {attempts} attempts (retryable): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider error: {0}")]
    Fatal(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript: {0}")]
    Transcript(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::RateLimitSaturated { .. } | GatewayError::Transport { .. }
        )
    }
}

#[async_trait]
pub trait LmProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Whether completions carry token log-probabilities.
    fn supports_logprobs(&self) -> bool;

    async fn complete(&self, request: &GenerationRequest) -> Result<ProviderOutput, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Spaces request starts at least `interval` apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: tokio::sync::Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(requests: f64) -> Self {
        Self {
            interval: Duration::from_secs_f64(1.0 / requests.max(f64::MIN_POSITIVE)),
            next: tokio::sync::Mutex::new(Instant::now()),
        }
    }

    pub async fn acquire(&self) {
        let mut next = self.next.lock().await;
        let now = Instant::now();
        if *next > now {
            tokio::time::sleep(*next - now).await;
        }
        *next = (*next).max(now) + self.interval;
    }
}

/// Cuts `text` at the earliest stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

/// Calls `provider` once per attempt until success or the retry budget runs
/// out. Refusals come back as an empty, refused generation.
pub async fn generate(
    request: &GenerationRequest,
    provider: &dyn LmProvider,
    retry: &RetryPolicy,
    limiter: Option<&RateLimiter>,
) -> Result<Generation, GatewayError> {
    request.validate()?;
    let max_attempts = retry.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        if let Some(limiter) = limiter {
            limiter.acquire().await;
        }
        let started = Instant::now();
        let outcome = provider.complete(request).await;
        let latency = started.elapsed();
        let delay = match outcome {
            Ok(out) => {
                let text = truncate_at_stop(&out.text, &request.stop_sequences).to_string();
                return Ok(Generation {
                    text,
                    first_token_logprob: out
                        .first_token_logprob
                        .filter(|_| provider.supports_logprobs())
                        .map(|lp| lp.min(0.0)),
                    provider: provider.id().to_string(),
                    latency,
                    prompt_tokens: out.prompt_tokens,
                    completion_tokens: out.completion_tokens,
                    refused: false,
                    replayed: false,
                });
            }
            Err(ProviderError::Refused(reason)) => {
                tracing::info!(provider = provider.id(), "refusal: {reason}");
                return Ok(Generation {
                    text: String::new(),
                    first_token_logprob: None,
                    provider: provider.id().to_string(),
                    latency,
                    prompt_tokens: request.prompt.token_estimate as u32,
                    completion_tokens: 0,
                    refused: true,
                    replayed: false,
                });
            }
            Err(ProviderError::Fatal(msg)) => return Err(GatewayError::Fatal(msg)),
            Err(ProviderError::RateLimited { retry_after }) => {
                if attempt >= max_attempts {
                    return Err(GatewayError::RateLimitSaturated { attempts: attempt });
                }
                retry_after.unwrap_or_default().max(retry.backoff(attempt))
            }
            Err(ProviderError::Transport(message)) => {
                if attempt >= max_attempts {
                    return Err(GatewayError::Transport { attempts: attempt, message });
                }
                retry.backoff(attempt)
            }
        };
        tracing::debug!(attempt, ?delay, "retrying generation");
        tokio::time::sleep(delay).await;
    }
}

/// Provider handle with retry policy, shared rate limiter and optional
/// transcript. Cheap to share behind an `Arc`.
pub struct Gateway {
    provider: Arc<dyn LmProvider>,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    transcript: Option<Transcript>,
    price_per_1k_tokens: f64,
}

impl Gateway {
    pub fn new(provider: Arc<dyn LmProvider>) -> Self {
        Self {
            provider,
            retry: RetryPolicy::default(),
            limiter: None,
            transcript: None,
            price_per_1k_tokens: 0.0,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, requests_per_second: f64) -> Self {
        self.limiter = Some(RateLimiter::per_second(requests_per_second));
        self
    }

    pub fn with_transcript(mut self, transcript: Transcript) -> Self {
        self.transcript = Some(transcript);
        self
    }

    pub fn with_price(mut self, price_per_1k_tokens: f64) -> Self {
        self.price_per_1k_tokens = price_per_1k_tokens;
        self
    }

    pub fn provider(&self) -> &dyn LmProvider {
        self.provider.as_ref()
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn supports_logprobs(&self) -> bool {
        self.provider.supports_logprobs()
    }

    pub fn price_per_1k_tokens(&self) -> f64 {
        self.price_per_1k_tokens
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    /// Replays from the transcript when the prompt was already answered,
    /// otherwise calls the provider and appends the result.
    pub async fn generate(&self, request: &GenerationRequest) -> Result<Generation, GatewayError> {
        let hash = request.prompt_hash();
        if let Some(record) = self.transcript.as_ref().and_then(|t| t.lookup(&hash)) {
            return Ok(record.to_generation());
        }
        let generation = generate(request, self.provider.as_ref(), &self.retry, self.limiter.as_ref()).await?;
        if let Some(transcript) = &self.transcript {
            let price = (generation.prompt_tokens + generation.completion_tokens) as f64
                * self.price_per_1k_tokens
                / 1000.0;
            let record = TranscriptRecord::new(&hash, request, &generation, price);
            transcript
                .append(record)
                .map_err(|e| GatewayError::Transcript(e.to_string()))?;
        }
        Ok(generation)
    }
}

/// Runs every request with at most `max_in_flight` outstanding. Output slot
/// `i` holds the result for request `i`; failures stay in their slot.
pub async fn batch_generate(
    requests: &[GenerationRequest],
    gateway: &Gateway,
    max_in_flight: usize,
) -> Vec<Result<Generation, GatewayError>> {
    stream::iter(requests)
        .map(|req| gateway.generate(req))
        .buffered(max_in_flight.max(1))
        .collect()
        .await
}
