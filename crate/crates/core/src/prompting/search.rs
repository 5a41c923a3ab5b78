//! Web-search snippets for context-augmented prompts.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntityRef, RelationSpec};
use crate::util::{sha256_hex, write_atomic};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search quota exhausted: {0}")]
    Quota(String),
    #[error("search transport error (retryable): {0}")]
    Transport(String),
    #[error("search provider misconfigured: {0}")]
    Config(String),
    #[error("malformed search response: {0}")]
    Parse(String),
    #[error("search cache: {0}")]
    Cache(#[from] std::io::Error),
}

impl SearchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SearchError::Quota(_) | SearchError::Transport(_))
    }
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub snippet: String,
    pub url: String,
}

/// The snippet placed on a prompt's `C:` line. Always non-empty; an absent
/// snippet is `None` at the call site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSnippet {
    pub query: String,
    pub snippet: String,
    pub source_url: String,
}

impl SearchSnippet {
    pub fn new(query: impl Into<String>, snippet: impl Into<String>, source_url: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            snippet: snippet.into(),
            source_url: source_url.into(),
        }
    }
}

#[async_trait]
pub trait SearchProvider: Send + Sync {
    fn id(&self) -> &str;

    async fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError>;
}

#[async_trait]
impl<T: SearchProvider + ?Sized> SearchProvider for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    async fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        (**self).search(query).await
    }
}

/// Search query for a (subject, relation) pair.
pub fn context_query(subject: &EntityRef, spec: &RelationSpec) -> String {
    format!("{} {}", subject.display_label(), spec.prompt_label)
}

/// Top-1 snippet for the subject and relation, or `None` when the provider
/// has no results. Transport failures are returned as errors.
pub async fn fetch_context(
    subject: &EntityRef,
    spec: &RelationSpec,
    provider: &dyn SearchProvider,
) -> Result<Option<SearchSnippet>, SearchError> {
    let query = context_query(subject, spec);
    let hits = provider.search(&query).await?;
    let Some(hit) = hits.into_iter().next() else {
        return Ok(None);
    };
    // Snippets go on a single prompt line.
    let snippet = hit.snippet.split_whitespace().collect::<Vec<_>>().join(" ");
    if snippet.is_empty() {
        return Ok(None);
    }
    Ok(Some(SearchSnippet {
        query,
        snippet,
        source_url: hit.url,
    }))
}

/// Canned results keyed by exact query string.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixtureSearch {
    results: HashMap<String, Vec<SearchHit>>,
}

impl FixtureSearch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads a JSON object mapping query strings to hit lists.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SearchError> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| SearchError::Parse(e.to_string()))
    }

    pub fn insert(&mut self, query: impl Into<String>, snippet: impl Into<String>, url: impl Into<String>) -> &mut Self {
        self.results.entry(query.into()).or_default().push(SearchHit {
            snippet: snippet.into(),
            url: url.into(),
        });
        self
    }
}

#[async_trait]
impl SearchProvider for FixtureSearch {
    fn id(&self) -> &str {
        "fixture-search"
    }

    async fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        Ok(self.results.get(query).cloned().unwrap_or_default())
    }
}

/// Client for a Custom-Search-style JSON API
/// (`GET {base}?key=..&cx=..&q=..` returning `items[].snippet/link`).
pub struct HttpSearchProvider {
    base_url: String,
    api_key: String,
    engine_id: String,
    client: reqwest::Client,
}

impl HttpSearchProvider {
    pub const DEFAULT_BASE_URL: &'static str = "https://www.googleapis.com/customsearch/v1";

    /// Reads the key from `key_env` and the engine id from `engine_env`.
    pub fn from_env(base_url: impl Into<String>, key_env: &str, engine_env: &str) -> Result<Self, SearchError> {
        let api_key = std::env::var(key_env)
            .map_err(|_| SearchError::Config(format!("environment variable {key_env} is not set")))?;
        let engine_id = std::env::var(engine_env)
            .map_err(|_| SearchError::Config(format!("environment variable {engine_env} is not set")))?;
        Self::new(base_url, api_key, engine_id)
    }

    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, engine_id: impl Into<String>) -> Result<Self, SearchError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| SearchError::Config(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into(),
            api_key: api_key.into(),
            engine_id: engine_id.into(),
            client,
        })
    }
}

#[derive(Deserialize)]
struct SearchResponse {
    #[serde(default)]
    items: Vec<SearchItem>,
}

#[derive(Deserialize)]
struct SearchItem {
    #[serde(default)]
    snippet: String,
    #[serde(default)]
    link: String,
}

#[async_trait]
impl SearchProvider for HttpSearchProvider {
    fn id(&self) -> &str {
        &self.base_url
    }

    async fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        let response = self
            .client
            .get(&self.base_url)
            .query(&[
                ("key", self.api_key.as_str()),
                ("cx", self.engine_id.as_str()),
                ("q", query),
                ("num", "1"),
            ])
            .send()
            .await
            .map_err(|e| SearchError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.as_u16() == 403 {
            return Err(SearchError::Quota(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(SearchError::Transport(format!("HTTP {status}")));
        }
        let body: SearchResponse = response
            .json()
            .await
            .map_err(|e| SearchError::Parse(e.to_string()))?;
        Ok(body
            .items
            .into_iter()
            .map(|i| SearchHit {
                snippet: i.snippet,
                url: i.link,
            })
            .collect())
    }
}

/// Disk cache for search results, one file per (provider, query) hash.
pub struct CachedSearch<P> {
    inner: P,
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl<P: SearchProvider> CachedSearch<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            locks: Mutex::new(HashMap::new()),
        }
    }
}

#[async_trait]
impl<P: SearchProvider> SearchProvider for CachedSearch<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    async fn search(&self, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        let key = sha256_hex(&[self.inner.id(), query]);
        let lock = self
            .locks
            .lock()
            .expect("search cache lock poisoned")
            .entry(key.clone())
            .or_default()
            .clone();
        let _guard = lock.lock().await;
        let path = self.dir.join(format!("search-{key}.json"));
        if let Ok(bytes) = tokio::fs::read(&path).await {
            if let Ok(hits) = serde_json::from_slice(&bytes) {
                return Ok(hits);
            }
        }
        let hits = self.inner.search(query).await?;
        write_atomic(&path, &serde_json::to_vec(&hits).expect("hits serialize"))?;
        Ok(hits)
    }
}
