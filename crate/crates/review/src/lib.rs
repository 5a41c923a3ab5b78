//! Manual verification of completed statements.
//!
//! Retained predictions are sampled into review batches, annotators rate
//! each item on a five-point scale, and ratings are folded into a per-relation
//! manual accuracy that gates acceptance. State lives in a single append-only
//! event log; see [`ReviewStore`].

mod accuracy;
mod api;
mod sample;
mod store;

pub use accuracy::{accept_relation, manual_accuracy, resolve_item, Decision, ManualAccuracyReport};
pub use api::{router, serve, AppState, ReviewConfig};
pub use sample::{allocate_samples, create_batch, search_query, ReviewBatch, ReviewItem, DEFAULT_SAMPLE_SIZE};
pub use store::{BatchSummary, BatchView, Event, RatingRequest, ReviewStore, StoredRating};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("requested {requested} items but only {available} retained predictions for {relation}")]
    SampleTooLarge {
        relation: String,
        requested: usize,
        available: usize,
    },
    #[error("no batch {0}")]
    UnknownBatch(String),
    #[error("no review item for prediction {0}")]
    UnknownItem(String),
    #[error("batch {0} is closed")]
    Closed(String),
    #[error("no ratings recorded for {0}")]
    NoRatings(String),
    #[error("no review batches for relation {0}")]
    UnknownRelation(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("review store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
