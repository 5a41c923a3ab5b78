//! Knowledge-base completion with few-shot language-model prompting.
//!
//! The crate covers the whole loop: loading gold facts and enumerating
//! subjects that lack a relation ([`ingest`]), building instruction-free
//! few-shot prompts and parsing answers ([`prompting`]), querying completion
//! or chat models with first-token confidence ([`gateway`]), precision
//! oriented thresholding ([`scoring`]), and the end-to-end completion run
//! with statement export and cost accounting ([`pipeline`]). The [`cli`]
//! module backs the `kbc` binary.

pub mod cli;
pub mod config;
pub mod gateway;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod prompting;
pub mod scoring;
mod util;

pub use config::{ConfigError, RelationConfig};
pub use model::{
    normalize_label, prediction_id, Answer, EntityRef, Fact, FewShotExample, LikertRating,
    LikertValue, PromptVariant, RelationSpec, ScoredPrediction, Threshold,
};
