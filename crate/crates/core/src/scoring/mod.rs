//! Retain-all metrics, precision-oriented thresholding and per-relation
//! threshold calibration.

mod curve;
mod metrics;
mod report;

use thiserror::Error;

pub use curve::{
    calibrate_curve, calibrate_threshold, curve_items, filter_by_threshold, recall_at_precision,
    Calibration, RecallAtPrecision, ThresholdCurve, DEFAULT_PRECISION_RANGE,
};
pub use metrics::{retain_all_metrics, MetricsReport, Prf, RelationMetrics};
pub use report::{
    render_metrics_table, render_threshold_table, write_json_report, ThresholdReport, ThresholdRow,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("cannot score an empty list")]
    EmptyList,
    #[error("target precision {0} is outside (0, 1)")]
    InvalidTarget(f64),
    #[error("precision range [{lo}, {hi}] is invalid")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("confidence {0} is not a finite number")]
    InvalidConfidence(f64),
    #[error("prediction {prediction} has no confidence score")]
    MissingConfidence { prediction: String },
    #[error("no gold facts for subject {subject} in relation {relation}")]
    NotInGold { relation: String, subject: String },
    #[error("list of {items} items cannot exceed a total of {total}")]
    TotalTooSmall { items: usize, total: usize },
}
