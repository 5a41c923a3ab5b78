//! Gold dataset loading and missing-subject enumeration.

mod fixture;
mod gold;
mod sparql;

use thiserror::Error;

pub use fixture::FixtureKb;
pub use gold::{load_gold_dataset, GoldDataset, OBJECT_SEPARATOR};
pub use sparql::{
    count_missing_query, count_statements_query, entity_id, find_all_missing_subjects,
    find_missing_subjects, gap_report, missing_subjects_query, CachedEndpoint, GapReport,
    HttpSparqlEndpoint, SparqlBindings, SparqlEndpoint, SparqlHead, SparqlResults, SparqlTerm,
    DIRECT_PROPERTY_PREFIX, ENTITY_PREFIX, INSTANCE_OF,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    MalformedRow {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("endpoint error{}: {message}", if *retryable { " (retryable)" } else { "" })]
    Endpoint {
        retryable: bool,
        query: String,
        message: String,
    },
    #[error("malformed SPARQL response: {message}")]
    Parse { query: String, message: String },
    #[error("{0}")]
    Config(String),
}

impl IngestError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, IngestError::Endpoint { retryable: true, .. })
    }

    /// The query that failed, when the error came from an endpoint.
    pub fn query(&self) -> Option<&str> {
        match self {
            IngestError::Endpoint { query, .. } | IngestError::Parse { query, .. } => Some(query),
            _ => None,
        }
    }
}
