//! End-to-end completion: calibrate, query missing subjects, filter, export,
//! plus cost and growth accounting.

mod budget;
mod cost;
mod estimate;
mod export;
mod manifest;
mod run;
mod sweep;

use thiserror::Error;

pub use budget::{Budget, BudgetTracker};
pub use cost::{estimate_cost, CostEstimate, CostModel, DEFAULT_AVG_PROMPT_TOKENS, DEFAULT_RETENTION_RATE};
pub use estimate::{
    addable_statements, load_gap_reports, parse_gap_reports, relative_growth, round_half_up,
    CompletionEstimate,
};
pub use export::{emit_quickstatements, needs_linking_path, predictions_to_statements, ExportCounts};
pub use manifest::{ManifestEntry, ManifestTotals, RunManifest};
pub use run::{
    calibrate_on_gold, predict_subjects, run_completion, CompletionOptions, CompletionRun,
    PredictOutcome, SubjectFailure,
};
pub use sweep::{render_sweep_table, sweep_variants, SweepCell, SweepReport, MAX_FEW_SHOT};

use crate::ingest::IngestError;
use crate::prompting::PromptError;
use crate::scoring::ScoringError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("relative growth is undefined for a relation with no current statements")]
    UndefinedGrowth,
    #[error("{0}")]
    Config(String),
}
