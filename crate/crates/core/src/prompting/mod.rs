//! Few-shot prompt construction, answer parsing and prompt-size estimation.

mod builder;
mod parse;
mod search;
mod tokens;

use thiserror::Error;

pub use builder::{
    build_prompt, build_prompt_with, format_answer, select_examples, Prompt, ANSWER_SEPARATOR,
    DONT_KNOW,
};
pub use parse::parse_answer;
pub use search::{
    context_query, fetch_context, CachedSearch, FixtureSearch, HttpSearchProvider, SearchError,
    SearchHit, SearchProvider, SearchSnippet,
};
pub use tokens::{estimate_tokens, TokenEstimator, WordPunctEstimator, DEFAULT_TOKEN_FACTOR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt configuration error: {0}")]
    Config(String),
    #[error("prompt precondition failed: {0}")]
    Precondition(String),
}
