use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{prompt_hash, GenerationRequest, LmProvider, ProviderError, ProviderOutput};
use crate::prompting::estimate_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub text: String,
    pub logprob: f64,
}

impl MockEntry {
    pub fn new(text: impl Into<String>, logprob: f64) -> Self {
        Self {
            text: text.into(),
            logprob,
        }
    }
}

/// Serializable mock answer table.
///
/// Lookup order: exact prompt hash, then subject id, then the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockTable {
    #[serde(default)]
    pub by_hash: HashMap<String, MockEntry>,
    #[serde(default)]
    pub by_subject: HashMap<String, MockEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<MockEntry>,
}

impl MockTable {
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Deterministic provider backed by a lookup table.
///
/// Also records call counts and peak concurrency, and can be told to fail
/// specific prompts, for exercising the gateway.
pub struct MockProvider {
    id: String,
    by_hash: HashMap<String, MockEntry>,
    by_subject: HashMap<String, MockEntry>,
    default: Option<MockEntry>,
    logprobs: bool,
    delay: Duration,
    failing: HashSet<String>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    calls: AtomicUsize,
    seen: Mutex<Vec<String>>,
}

/// Builds a mock from a `prompt hash → (text, logprob)` table. Unknown
/// prompts answer `("Don't know", -3.0)`.
pub fn mock_provider(table: HashMap<String, (String, f64)>) -> MockProvider {
    MockProvider::from_table(MockTable {
        by_hash: table
            .into_iter()
            .map(|(k, (text, logprob))| (k, MockEntry { text, logprob }))
            .collect(),
        ..Default::default()
    })
}

impl MockProvider {
    pub const DEFAULT_TEXT: &'static str = "Don't know";
    pub const DEFAULT_LOGPROB: f64 = -3.0;

    pub fn from_table(table: MockTable) -> Self {
        Self {
            id: "mock".into(),
            by_hash: table.by_hash,
            by_subject: table.by_subject,
            default: Some(
                table
                    .default
                    .unwrap_or_else(|| MockEntry::new(Self::DEFAULT_TEXT, Self::DEFAULT_LOGPROB)),
            ),
            logprobs: true,
            delay: Duration::ZERO,
            failing: HashSet::new(),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Unknown prompts fail instead of answering the default.
    pub fn without_default(mut self) -> Self {
        self.default = None;
        self
    }

    /// Behave like a chat model: no log-probabilities.
    pub fn without_logprobs(mut self) -> Self {
        self.logprobs = false;
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// Hard-fail the prompt with this text.
    pub fn fail_prompt(mut self, prompt_text: &str) -> Self {
        self.failing.insert(prompt_hash(prompt_text));
        self
    }

    pub fn insert_prompt(&mut self, prompt_text: &str, text: impl Into<String>, logprob: f64) {
        self.by_hash
            .insert(prompt_hash(prompt_text), MockEntry::new(text, logprob));
    }

    pub fn insert_subject(&mut self, subject_id: &str, text: impl Into<String>, logprob: f64) {
        self.by_subject
            .insert(subject_id.to_string(), MockEntry::new(text, logprob));
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    /// Prompt hashes in call order.
    pub fn seen_hashes(&self) -> Vec<String> {
        self.seen.lock().expect("mock log poisoned").clone()
    }

    fn lookup(&self, hash: &str, request: &GenerationRequest) -> Option<&MockEntry> {
        self.by_hash
            .get(hash)
            .or_else(|| self.by_subject.get(&request.prompt.subject.id))
            .or(self.default.as_ref())
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl LmProvider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports_logprobs(&self) -> bool {
        self.logprobs
    }

    async fn complete(&self, request: &GenerationRequest) -> Result<ProviderOutput, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let hash = prompt_hash(&request.prompt.text);
        self.seen.lock().expect("mock log poisoned").push(hash.clone());
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        } else {
            tokio::task::yield_now().await;
        }
        if self.failing.contains(&hash) {
            return Err(ProviderError::Fatal(format!("mock failure for prompt {hash}")));
        }
        let entry = self
            .lookup(&hash, request)
            .ok_or_else(|| ProviderError::Fatal(format!("no mock entry for prompt {hash}")))?;
        Ok(ProviderOutput {
            text: entry.text.clone(),
            first_token_logprob: self.logprobs.then_some(entry.logprob),
            prompt_tokens: request.prompt.token_estimate as u32,
            completion_tokens: estimate_tokens(&entry.text) as u32,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{batch_generate, Gateway, GatewayError, RetryPolicy};
    use crate::model::{EntityRef, PromptVariant};
    use crate::prompting::Prompt;
    use std::sync::Arc;

    fn request(text: &str) -> GenerationRequest {
        GenerationRequest::new(Prompt {
            text: text.to_string(),
            token_estimate: 5,
            variant: PromptVariant::Standard,
            subject: EntityRef::new("Q1", "s"),
            relation: "P1".into(),
        })
    }

    #[tokio::test]
    async fn table_entry_and_default() {
        let mut table = HashMap::new();
        table.insert(prompt_hash("known"), ("Swedish".to_string(), -0.05));
        let m = mock_provider(table);
        let out = m.complete(&request("known")).await.unwrap();
        assert_eq!((out.text.as_str(), out.first_token_logprob), ("Swedish", Some(-0.05)));
        let out = m.complete(&request("unknown")).await.unwrap();
        assert_eq!((out.text.as_str(), out.first_token_logprob), ("Don't know", Some(-3.0)));
    }

    #[tokio::test]
    async fn without_default_fails_unknown() {
        let m = mock_provider(HashMap::new()).without_default();
        assert!(matches!(
            m.complete(&request("x")).await,
            Err(ProviderError::Fatal(_))
        ));
    }

    #[tokio::test]
    async fn chat_style_has_no_logprob() {
        let gw = Gateway::new(Arc::new(mock_provider(HashMap::new()).without_logprobs()));
        let g = gw.generate(&request("x")).await.unwrap();
        assert_eq!(g.first_token_logprob, None);
        assert_eq!(g.confidence(), None);
    }

    #[tokio::test]
    async fn batch_keeps_order() {
        let mut m = mock_provider(HashMap::new());
        for (i, t) in ["a", "b", "c"].iter().enumerate() {
            m.insert_prompt(t, format!("answer {i}"), -0.1);
        }
        let gw = Gateway::new(Arc::new(m.with_delay(Duration::from_millis(1))));
        let reqs: Vec<_> = ["a", "b", "c"].iter().map(|t| request(t)).collect();
        let out = batch_generate(&reqs, &gw, 3).await;
        let texts: Vec<_> = out.iter().map(|r| r.as_ref().unwrap().text.clone()).collect();
        assert_eq!(texts, ["answer 0", "answer 1", "answer 2"]);
    }

    #[tokio::test]
    async fn batch_partial_failure() {
        let m = mock_provider(HashMap::new()).fail_prompt("p2");
        let gw = Gateway::new(Arc::new(m)).with_retry(RetryPolicy::immediate(2));
        let reqs: Vec<_> = (0..5).map(|i| request(&format!("p{i}"))).collect();
        let out = batch_generate(&reqs, &gw, 2).await;
        assert_eq!(out.len(), 5);
        assert_eq!(out.iter().filter(|r| r.is_ok()).count(), 4);
        assert!(matches!(out[2], Err(GatewayError::Fatal(_))));
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 4)]
    async fn batch_bounds_concurrency() {
        let m = Arc::new(mock_provider(HashMap::new()).with_delay(Duration::from_micros(200)));
        let gw = Gateway::new(m.clone());
        let reqs: Vec<_> = (0..1000).map(|i| request(&format!("p{i}"))).collect();
        let out = batch_generate(&reqs, &gw, 8).await;
        assert_eq!(out.len(), 1000);
        assert_eq!(m.calls(), 1000);
        assert!(m.peak_in_flight() <= 8, "peak {}", m.peak_in_flight());
        assert!(m.peak_in_flight() >= 2);
    }

    #[tokio::test]
    async fn runs_are_identical() {
        let run = || async {
            let gw = Gateway::new(Arc::new(mock_provider(HashMap::new())));
            let reqs: Vec<_> = (0..20).map(|i| request(&format!("p{i}"))).collect();
            batch_generate(&reqs, &gw, 4)
                .await
                .into_iter()
                .map(|r| {
                    let g = r.unwrap();
                    (g.text, g.first_token_logprob)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run().await, run().await);
    }
}
