use serde::{Deserialize, Serialize};

use super::export::ExportCounts;
use super::run::CompletionRun;
use crate::model::{RelationSpec, Threshold};

/// What one relation's run did. Contains no timestamps or timings so that
/// repeated runs over the same inputs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub relation: String,
    pub name: String,
    pub spec_hash: String,
    pub threshold: Option<Threshold>,
    pub calibrated: bool,
    pub low_confidence: bool,
    pub skipped: Option<String>,
    pub missing_subjects: u64,
    pub queried: u64,
    pub retained: u64,
    pub high_confidence_fraction: f64,
    pub addable: u64,
    pub statements_written: usize,
    pub needs_linking: usize,
    pub failures: usize,
    pub requests: usize,
    pub cost: f64,
    pub budget_exhausted: bool,
    pub manual_accuracy: Option<f64>,
    /// Manual accuracy met the relation's target precision.
    pub accepted: Option<bool>,
}

impl ManifestEntry {
    pub fn new(spec: &RelationSpec, run: &CompletionRun, export: ExportCounts) -> Self {
        let manual_accuracy = run.estimate.manual_accuracy;
        Self {
            relation: spec.id.clone(),
            name: spec.name.clone(),
            spec_hash: spec.content_hash(),
            threshold: run.threshold,
            calibrated: run.calibration.is_some(),
            low_confidence: run.calibration.as_ref().is_some_and(|c| c.low_confidence),
            skipped: run.skipped.clone(),
            missing_subjects: run.estimate.missing_subjects,
            queried: run.estimate.queried,
            retained: run.estimate.retained,
            high_confidence_fraction: run.estimate.high_confidence_fraction,
            addable: run.estimate.addable,
            statements_written: export.written,
            needs_linking: export.needs_linking,
            failures: run.failures.len(),
            requests: run.requests,
            cost: run.cost,
            budget_exhausted: run.budget_exhausted,
            manual_accuracy,
            accepted: manual_accuracy.map(|a| a >= spec.target_precision),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestTotals {
    pub queried: u64,
    pub retained: u64,
    pub statements_written: usize,
    pub needs_linking: usize,
    pub failures: usize,
    pub requests: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub provider: String,
    pub variant: String,
    pub relations: Vec<ManifestEntry>,
    pub totals: ManifestTotals,
    pub budget_exhausted: bool,
}

impl RunManifest {
    pub fn new(provider: impl Into<String>, variant: impl Into<String>, relations: Vec<ManifestEntry>) -> Self {
        let mut totals = ManifestTotals::default();
        for e in &relations {
            totals.queried += e.queried;
            totals.retained += e.retained;
            totals.statements_written += e.statements_written;
            totals.needs_linking += e.needs_linking;
            totals.failures += e.failures;
            totals.requests += e.requests;
            totals.cost += e.cost;
        }
        let budget_exhausted = relations.iter().any(|e| e.budget_exhausted);
        Self {
            provider: provider.into(),
            variant: variant.into(),
            relations,
            totals,
            budget_exhausted,
        }
    }
}
