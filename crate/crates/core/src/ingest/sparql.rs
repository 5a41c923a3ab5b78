//! SPARQL access: query construction, HTTP transport, on-disk result cache.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{EntityRef, RelationSpec};
use crate::util::{sha256_hex, write_atomic};

pub const ENTITY_PREFIX: &str = "http://www.wikidata.org/entity/";
pub const DIRECT_PROPERTY_PREFIX: &str = "http://www.wikidata.org/prop/direct/";
/// Property linking an item to its class.
pub const INSTANCE_OF: &str = "P31";
pub const LABEL_LANGUAGE: &str = "en";

const PREFIXES: &str = "PREFIX wd: <http://www.wikidata.org/entity/>\n\
PREFIX wdt: <http://www.wikidata.org/prop/direct/>\n\
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n";

/// SPARQL 1.1 query results, JSON serialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparqlResults {
    pub head: SparqlHead,
    pub results: SparqlBindings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparqlHead {
    #[serde(default)]
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparqlBindings {
    pub bindings: Vec<HashMap<String, SparqlTerm>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparqlTerm {
    #[serde(rename = "type")]
    pub kind: String,
    pub value: String,
    #[serde(rename = "xml:lang", default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
}

impl SparqlTerm {
    pub fn uri(value: impl Into<String>) -> Self {
        Self {
            kind: "uri".into(),
            value: value.into(),
            lang: None,
            datatype: None,
        }
    }

    pub fn literal(value: impl Into<String>, lang: Option<&str>) -> Self {
        Self {
            kind: "literal".into(),
            value: value.into(),
            lang: lang.map(str::to_string),
            datatype: None,
        }
    }

    pub fn integer(value: u64) -> Self {
        Self {
            kind: "literal".into(),
            value: value.to_string(),
            lang: None,
            datatype: Some("http://www.w3.org/2001/XMLSchema#integer".into()),
        }
    }
}

/// Anything that answers SPARQL SELECT queries with JSON results.
#[async_trait]
pub trait SparqlEndpoint: Send + Sync {
    /// Stable identifier, used as part of the cache key.
    fn id(&self) -> &str;

    async fn select(&self, query: &str) -> Result<SparqlResults, IngestError>;
}

#[async_trait]
impl<T: SparqlEndpoint + ?Sized> SparqlEndpoint for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    async fn select(&self, query: &str) -> Result<SparqlResults, IngestError> {
        (**self).select(query).await
    }
}

/// SPARQL over HTTP GET.
pub struct HttpSparqlEndpoint {
    url: String,
    client: reqwest::Client,
}

impl HttpSparqlEndpoint {
    pub fn new(url: impl Into<String>) -> Result<Self, IngestError> {
        Self::with_timeout(url, Duration::from_secs(60))
    }

    pub fn with_timeout(url: impl Into<String>, timeout: Duration) -> Result<Self, IngestError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("kbc/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| IngestError::Endpoint {
                retryable: false,
                query: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self {
            url: url.into(),
            client,
        })
    }
}

#[async_trait]
impl SparqlEndpoint for HttpSparqlEndpoint {
    fn id(&self) -> &str {
        &self.url
    }

    async fn select(&self, query: &str) -> Result<SparqlResults, IngestError> {
        tracing::debug!(endpoint = %self.url, "sparql query");
        let endpoint_err = |retryable: bool, message: String| IngestError::Endpoint {
            retryable,
            query: query.to_string(),
            message,
        };
        let response = self
            .client
            .get(&self.url)
            .query(&[("query", query), ("format", "json")])
            .header("Accept", "application/sparql-results+json")
            .send()
            .await
            .map_err(|e| endpoint_err(true, e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err(endpoint_err(retryable, format!("HTTP {status}")));
        }
        let body = response
            .text()
            .await
            .map_err(|e| endpoint_err(true, e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| IngestError::Parse {
            query: query.to_string(),
            message: e.to_string(),
        })
    }
}

/// Disk cache in front of an endpoint, one JSON file per (endpoint, query)
/// hash. Concurrent misses for the same key are serialized so the inner
/// endpoint is asked once.
pub struct CachedEndpoint<E> {
    inner: E,
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl<E: SparqlEndpoint> CachedEndpoint<E> {
    pub fn new(inner: E, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache_key(&self, query: &str) -> String {
        sha256_hex(&[self.inner.id(), query])
    }

    fn key_lock(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("cache lock map poisoned")
            .entry(key.to_string())
            .or_default()
            .clone()
    }
}

#[async_trait]
impl<E: SparqlEndpoint> SparqlEndpoint for CachedEndpoint<E> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    async fn select(&self, query: &str) -> Result<SparqlResults, IngestError> {
        let key = self.cache_key(query);
        let path = self.dir.join(format!("{key}.json"));
        let lock = self.key_lock(&key);
        let _guard = lock.lock().await;
        if let Ok(bytes) = tokio::fs::read(&path).await {
            match serde_json::from_slice(&bytes) {
                Ok(results) => return Ok(results),
                Err(e) => tracing::warn!(path = %path.display(), "discarding corrupt cache entry: {e}"),
            }
        }
        let results = self.inner.select(query).await?;
        let bytes = serde_json::to_vec(&results).expect("results serialize");
        write_atomic(&path, &bytes).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(results)
    }
}

/// Strips the entity namespace from an IRI, leaving e.g. `Q42`.
pub fn entity_id(iri: &str) -> &str {
    iri.rsplit(['/', '#']).next().unwrap_or(iri)
}

pub fn missing_subjects_query(spec: &RelationSpec, limit: Option<usize>, offset: usize) -> String {
    let mut q = format!(
        "{PREFIXES}SELECT ?item ?itemLabel WHERE {{\n  \
         ?item wdt:{INSTANCE_OF} wd:{ty} .\n  \
         FILTER NOT EXISTS {{ ?item wdt:{prop} ?value . }}\n  \
         OPTIONAL {{ ?item rdfs:label ?itemLabel . FILTER(LANG(?itemLabel) = \"{LABEL_LANGUAGE}\") }}\n\
         }}\nORDER BY ?item\n",
        ty = spec.subject_type,
        prop = spec.id,
    );
    if let Some(limit) = limit {
        q.push_str(&format!("LIMIT {limit}\n"));
    }
    if offset > 0 {
        q.push_str(&format!("OFFSET {offset}\n"));
    }
    q
}

pub fn count_missing_query(spec: &RelationSpec) -> String {
    format!(
        "{PREFIXES}SELECT (COUNT(DISTINCT ?item) AS ?count) WHERE {{\n  \
         ?item wdt:{INSTANCE_OF} wd:{ty} .\n  \
         FILTER NOT EXISTS {{ ?item wdt:{prop} ?value . }}\n}}\n",
        ty = spec.subject_type,
        prop = spec.id,
    )
}

pub fn count_statements_query(spec: &RelationSpec) -> String {
    format!(
        "{PREFIXES}SELECT (COUNT(*) AS ?count) WHERE {{\n  ?s wdt:{prop} ?o .\n}}\n",
        prop = spec.id,
    )
}

fn parse_count(results: &SparqlResults, query: &str) -> Result<u64, IngestError> {
    let value = results
        .results
        .bindings
        .first()
        .and_then(|b| b.get("count"))
        .ok_or_else(|| IngestError::Parse {
            query: query.to_string(),
            message: "missing ?count binding".into(),
        })?;
    value.value.trim().parse().map_err(|e| IngestError::Parse {
        query: query.to_string(),
        message: format!("count `{}`: {e}", value.value),
    })
}

/// Subjects of `spec.subject_type` lacking any `spec.id` statement, in
/// identifier order. `limit = None` fetches everything from `offset` on.
pub async fn find_missing_subjects(
    spec: &RelationSpec,
    endpoint: &dyn SparqlEndpoint,
    limit: Option<usize>,
    offset: usize,
) -> Result<Vec<EntityRef>, IngestError> {
    if spec.subject_type.is_empty() {
        return Err(IngestError::Config(format!(
            "{}: subject_type is not set",
            spec.name
        )));
    }
    let query = missing_subjects_query(spec, limit, offset);
    let results = endpoint.select(&query).await?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for binding in &results.results.bindings {
        let item = binding.get("item").ok_or_else(|| IngestError::Parse {
            query: query.clone(),
            message: "binding without ?item".into(),
        })?;
        let id = entity_id(&item.value).to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            continue;
        }
        let label = binding
            .get("itemLabel")
            .map(|t| t.value.clone())
            .filter(|l| !l.is_empty())
            .unwrap_or_else(|| id.clone());
        out.push(EntityRef::new(id, label));
    }
    Ok(out)
}

/// Fetches every missing subject page by page, at most `max_in_flight`
/// pages concurrently. Pages are concatenated in offset order.
pub async fn find_all_missing_subjects(
    spec: &RelationSpec,
    endpoint: &dyn SparqlEndpoint,
    page_size: usize,
    max_in_flight: usize,
) -> Result<Vec<EntityRef>, IngestError> {
    let page_size = page_size.max(1);
    let total = count_missing(spec, endpoint).await? as usize;
    let offsets: Vec<usize> = (0..total).step_by(page_size).collect();
    let pages: Vec<Vec<EntityRef>> = stream::iter(offsets)
        .map(|offset| find_missing_subjects(spec, endpoint, Some(page_size), offset))
        .buffered(max_in_flight.max(1))
        .try_collect()
        .await?;
    Ok(pages.into_iter().flatten().collect())
}

async fn count_missing(spec: &RelationSpec, endpoint: &dyn SparqlEndpoint) -> Result<u64, IngestError> {
    let query = count_missing_query(spec);
    let results = endpoint.select(&query).await?;
    parse_count(&results, &query)
}

/// Per-relation statement and gap counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub relation: String,
    pub current_statements: u64,
    pub missing_subjects: u64,
}

pub async fn gap_report(
    spec: &RelationSpec,
    endpoint: &dyn SparqlEndpoint,
) -> Result<GapReport, IngestError> {
    let query = count_statements_query(spec);
    let results = endpoint.select(&query).await?;
    let current_statements = parse_count(&results, &query)?;
    let missing_subjects = count_missing(spec, endpoint).await?;
    Ok(GapReport {
        relation: spec.id.clone(),
        current_statements,
        missing_subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_ids_from_iris() {
        assert_eq!(entity_id("http://www.wikidata.org/entity/Q42"), "Q42");
        assert_eq!(entity_id("Q42"), "Q42");
    }

    #[test]
    fn query_text_is_stable() {
        let spec = crate::config::RelationConfig::bundled()
            .get("developedBy")
            .unwrap()
            .clone();
        let q = missing_subjects_query(&spec, Some(10), 20);
        assert!(q.contains("?item wdt:P31 wd:Q7397 ."));
        assert!(q.contains("FILTER NOT EXISTS { ?item wdt:P178 ?value . }"));
        assert!(q.ends_with("ORDER BY ?item\nLIMIT 10\nOFFSET 20\n"));
        assert_eq!(q, missing_subjects_query(&spec, Some(10), 20));
    }

    #[test]
    fn results_json_parses() {
        let body = r#"{"head":{"vars":["item","itemLabel"]},"results":{"bindings":[
            {"item":{"type":"uri","value":"http://www.wikidata.org/entity/Q1"},
             "itemLabel":{"type":"literal","value":"x","xml:lang":"en"}}]}}"#;
        let r: SparqlResults = serde_json::from_str(body).unwrap();
        assert_eq!(r.results.bindings[0]["itemLabel"].lang.as_deref(), Some("en"));
    }
}
