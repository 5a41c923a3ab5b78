use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::budget::{Budget, BudgetTracker};
use super::run::{predict_subjects, CompletionOptions};
use super::PipelineError;
use crate::gateway::Gateway;
use crate::ingest::GoldDataset;
use crate::model::{EntityRef, PromptVariant, RelationSpec};
use crate::scoring::{RecallAtPrecision, ThresholdReport};

/// Largest supported few-shot count.
pub const MAX_FEW_SHOT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub variant: PromptVariant,
    pub results: Vec<RecallAtPrecision>,
    pub error: Option<String>,
}

impl SweepCell {
    pub fn coverage_at(&self, target: f64) -> Option<f64> {
        self.results.iter().find(|r| r.target == target).map(|r| r.coverage)
    }
}

/// Coverage at each target precision for every (k, variant) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub relation: String,
    pub targets: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn cell(&self, k: usize, variant: PromptVariant) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.k == k && c.variant == variant)
    }
}

/// Evaluates the relation's gold subjects under each few-shot count and
/// prompt variant. Cells that fail are kept with their error.
pub async fn sweep_variants(
    spec: &RelationSpec,
    gold: &GoldDataset,
    gateway: &Gateway,
    k_values: &[usize],
    variants: &[PromptVariant],
    targets: &[f64],
    options: &CompletionOptions,
) -> Result<SweepReport, PipelineError> {
    if let Some(k) = k_values.iter().find(|k| !(1..=MAX_FEW_SHOT).contains(*k)) {
        return Err(PipelineError::Config(format!("few-shot count {k} outside 1..={MAX_FEW_SHOT}")));
    }
    let subjects: Vec<EntityRef> = gold.facts(&spec.id).iter().map(|f| f.subject.clone()).collect();
    let budget = BudgetTracker::new(Budget::unlimited());
    let mut cells = Vec::new();
    for &k in k_values {
        for &variant in variants {
            let mut cell_spec = spec.clone();
            cell_spec.few_shot_count = k;
            let result = async {
                let outcome = predict_subjects(&cell_spec, &subjects, variant, gateway, options, &budget).await?;
                if outcome.predictions.is_empty() {
                    return Err(PipelineError::Config("no predictions".into()));
                }
                let report = ThresholdReport::from_predictions(&outcome.predictions, gold, targets)?;
                Ok(report.rows.into_iter().next().map(|r| r.results).unwrap_or_default())
            }
            .await;
            cells.push(match result {
                Ok(results) => SweepCell { k, variant, results, error: None },
                Err(e) => SweepCell { k, variant, results: Vec::new(), error: Some(e.to_string()) },
            });
        }
    }
    Ok(SweepReport {
        relation: spec.id.clone(),
        targets: targets.to_vec(),
        cells,
    })
}

/// One row per (relation, k), one column group per variant.
pub fn render_sweep_table(reports: &[SweepReport], names: &dyn Fn(&str) -> String) -> String {
    let mut variants: Vec<PromptVariant> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for r in reports {
        for c in &r.cells {
            if !variants.contains(&c.variant) {
                variants.push(c.variant);
            }
        }
        for &t in &r.targets {
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
    }
    let w = reports
        .iter()
        .map(|r| names(&r.relation).chars().count())
        .max()
        .unwrap_or(0)
        .max("Relation".len());
    let mut out = String::new();
    let _ = write!(out, "{:<w$}  {:>2}", "Relation", "k");
    for v in &variants {
        for t in &targets {
            let label = format!("{}@P{}", v.as_str(), (t * 100.0).round() as i64);
            let _ = write!(out, "  {label:>16}");
        }
    }
    out.push('\n');
    for r in reports {
        let mut ks: Vec<usize> = r.cells.iter().map(|c| c.k).collect();
        ks.dedup();
        for k in ks {
            let _ = write!(out, "{:<w$}  {k:>2}", names(&r.relation));
            for &v in &variants {
                for &t in &targets {
                    match r.cell(k, v) {
                        Some(c) if c.error.is_none() => {
                            let cov = c.coverage_at(t).map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
                            let _ = write!(out, "  {cov:>16}");
                        }
                        Some(_) => {
                            let _ = write!(out, "  {:>16}", "error");
                        }
                        None => {
                            let _ = write!(out, "  {:>16}", "-");
                        }
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}
