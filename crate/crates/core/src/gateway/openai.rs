use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{GenerationRequest, LmProvider, ProviderError, ProviderOutput};

/// Which endpoint family a provider speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST {base}/completions`, with first-token logprobs.
    Completion,
    /// `POST {base}/chat/completions`, text only.
    Chat,
}

/// Client for OpenAI-compatible completion and chat endpoints.
pub struct OpenAiProvider {
    id: String,
    base_url: String,
    model: String,
    api_key: Option<String>,
    style: ApiStyle,
    client: reqwest::Client,
}

impl OpenAiProvider {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        style: ApiStyle,
        api_key: Option<String>,
    ) -> Result<Self, ProviderError> {
        let model = model.into();
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ProviderError::Fatal(e.to_string()))?;
        Ok(Self {
            id: model.clone(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model,
            api_key,
            style,
            client,
        })
    }

    /// Reads the API key from the named environment variable.
    pub fn from_env(
        base_url: impl Into<String>,
        model: impl Into<String>,
        style: ApiStyle,
        key_env: &str,
    ) -> Result<Self, ProviderError> {
        let key = std::env::var(key_env)
            .map_err(|_| ProviderError::Fatal(format!("environment variable {key_env} is not set")))?;
        Self::new(base_url, model, style, Some(key))
    }

    pub fn style(&self) -> ApiStyle {
        self.style
    }

    fn body(&self, request: &GenerationRequest) -> serde_json::Value {
        match self.style {
            ApiStyle::Completion => json!({
                "model": self.model,
                "prompt": request.prompt.text,
                "max_tokens": request.max_tokens,
                "temperature": request.temperature,
                "stop": request.stop_sequences,
                "logprobs": 1,
            }),
            ApiStyle::Chat => json!({
                "model": self.model,
                "messages": [{"role": "user", "content": request.prompt.text}],
                "max_tokens": request.max_tokens,
                "temperature": request.temperature,
            }),
        }
    }
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    #[serde(default)]
    text: String,
    logprobs: Option<Logprobs>,
}

#[derive(Deserialize)]
struct Logprobs {
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
    refusal: Option<String>,
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    headers
        .get(reqwest::header::RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|s| s.is_finite() && *s >= 0.0)
        .map(Duration::from_secs_f64)
}

#[async_trait]
impl LmProvider for OpenAiProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports_logprobs(&self) -> bool {
        self.style == ApiStyle::Completion
    }

    async fn complete(&self, request: &GenerationRequest) -> Result<ProviderOutput, ProviderError> {
        let path = match self.style {
            ApiStyle::Completion => "completions",
            ApiStyle::Chat => "chat/completions",
        };
        let mut builder = self
            .client
            .post(format!("{}/{path}", self.base_url))
            .json(&self.body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 {
            return Err(ProviderError::RateLimited {
                retry_after: retry_after(response.headers()),
            });
        }
        if status.is_server_error() {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(ProviderError::Fatal(format!("HTTP {status}: {body}")));
        }
        let bytes = response
            .bytes()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let parse_err = |e: serde_json::Error| ProviderError::Fatal(format!("malformed response: {e}"));
        match self.style {
            ApiStyle::Completion => {
                let body: CompletionResponse = serde_json::from_slice(&bytes).map_err(parse_err)?;
                let choice = body
                    .choices
                    .into_iter()
                    .next()
                    .ok_or_else(|| ProviderError::Fatal("response has no choices".into()))?;
                let first = choice
                    .logprobs
                    .and_then(|l| l.token_logprobs.into_iter().next().flatten());
                let usage = body.usage.unwrap_or(Usage { prompt_tokens: 0, completion_tokens: 0 });
                Ok(ProviderOutput {
                    text: choice.text,
                    first_token_logprob: first,
                    prompt_tokens: usage.prompt_tokens,
                    completion_tokens: usage.completion_tokens,
                })
            }
            ApiStyle::Chat => {
                let body: ChatResponse = serde_json::from_slice(&bytes).map_err(parse_err)?;
                let choice = body
                    .choices
                    .into_iter()
                    .next()
                    .ok_or_else(|| ProviderError::Fatal("response has no choices".into()))?;
                if let Some(reason) = choice.message.refusal {
                    return Err(ProviderError::Refused(reason));
                }
                if choice.finish_reason.as_deref() == Some("content_filter") {
                    return Err(ProviderError::Refused("content_filter".into()));
                }
                let usage = body.usage.unwrap_or(Usage { prompt_tokens: 0, completion_tokens: 0 });
                Ok(ProviderOutput {
                    text: choice.message.content.unwrap_or_default(),
                    first_token_logprob: None,
                    prompt_tokens: usage.prompt_tokens,
                    completion_tokens: usage.completion_tokens,
                })
            }
        }
    }
}
