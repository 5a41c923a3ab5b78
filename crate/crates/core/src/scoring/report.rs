use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::curve::{curve_items, RecallAtPrecision, ThresholdCurve};
use super::metrics::MetricsReport;
use super::ScoringError;
use crate::ingest::GoldDataset;
use crate::model::ScoredPrediction;
use crate::util::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub relation: String,
    pub results: Vec<RecallAtPrecision>,
}

impl ThresholdRow {
    pub fn coverage_at(&self, target: f64) -> Option<f64> {
        self.results.iter().find(|r| r.target == target).map(|r| r.coverage)
    }
}

/// Coverage at each target precision, per relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub targets: Vec<f64>,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdReport {
    /// Builds one row per relation present in `predictions`.
    pub fn from_predictions(
        predictions: &[ScoredPrediction],
        gold: &GoldDataset,
        targets: &[f64],
    ) -> Result<Self, ScoringError> {
        let mut by_relation: BTreeMap<&str, Vec<ScoredPrediction>> = BTreeMap::new();
        for p in predictions {
            by_relation.entry(p.relation.as_str()).or_default().push(p.clone());
        }
        let mut rows = Vec::new();
        for (relation, preds) in by_relation {
            let (items, total) = curve_items(&preds, gold)?;
            let curve = ThresholdCurve::new(items, total)?;
            let results = targets
                .iter()
                .map(|&t| curve.recall_at_precision(t))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(ThresholdRow {
                relation: relation.to_string(),
                results,
            });
        }
        Ok(Self {
            targets: targets.to_vec(),
            rows,
        })
    }
}

fn name_width<'a>(names: impl Iterator<Item = &'a str>, floor: usize) -> usize {
    names.map(|n| n.chars().count()).max().unwrap_or(0).max(floor)
}

/// Plain-text P/R/F1 table with a closing macro-average row.
pub fn render_metrics_table(report: &MetricsReport) -> String {
    let w = name_width(report.relations.iter().map(|r| r.relation.as_str()), "Macro-Average".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<w$}  {:>5}  {:>5}  {:>5}", "Relation", "P", "R", "F1");
    for r in &report.relations {
        let s = r.scores;
        let _ = writeln!(out, "{:<w$}  {:>5.2}  {:>5.2}  {:>5.2}", r.relation, s.precision, s.recall, s.f1);
    }
    let m = report.macro_average;
    let _ = writeln!(out, "{:<w$}  {:>5.2}  {:>5.2}  {:>5.2}", "Macro-Average", m.precision, m.recall, m.f1);
    out
}

fn target_label(t: f64) -> String {
    format!("coverage@P{}", (t * 100.0).round() as i64)
}

/// Plain-text coverage table, one column per target precision.
pub fn render_threshold_table(report: &ThresholdReport) -> String {
    let w = name_width(report.rows.iter().map(|r| r.relation.as_str()), "Relation".len());
    let labels: Vec<String> = report.targets.iter().map(|&t| target_label(t)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<w$}", "Relation");
    for l in &labels {
        let _ = write!(out, "  {l:>12}");
    }
    out.push('\n');
    for row in &report.rows {
        let _ = write!(out, "{:<w$}", row.relation);
        for &t in &report.targets {
            match row.coverage_at(t) {
                Some(c) => {
                    let _ = write!(out, "  {c:>12.2}");
                }
                None => {
                    let _ = write!(out, "  {:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `value` as pretty JSON with a trailing newline, atomically.
pub fn write_json_report<T: Serialize>(path: impl AsRef<Path>, value: &T) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    write_atomic(path.as_ref(), &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Threshold;
    use crate::scoring::{Prf, RelationMetrics};

    #[test]
    fn metrics_table_layout() {
        let report = MetricsReport {
            relations: vec![RelationMetrics {
                relation: "writtenIn".into(),
                scores: Prf { precision: 0.91, recall: 0.78, f1: 0.84 },
                subjects: 1,
                abstained: 0,
                hits: 0,
                predicted: 0,
                gold: 0,
            }],
            macro_average: Prf { precision: 0.91, recall: 0.78, f1: 0.84 },
        };
        let text = render_metrics_table(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("writtenIn"));
        assert!(lines[1].ends_with("0.91   0.78   0.84"));
        assert!(lines[2].starts_with("Macro-Average"));
    }

    #[test]
    fn threshold_table_layout() {
        let r = |target, coverage| RecallAtPrecision {
            target,
            coverage,
            threshold: Threshold::RetainNothing,
            retained: 0,
            precision: None,
        };
        let report = ThresholdReport {
            targets: vec![0.95, 0.9],
            rows: vec![ThresholdRow {
                relation: "writtenIn".into(),
                results: vec![r(0.95, 0.69), r(0.9, 0.76)],
            }],
        };
        let text = render_threshold_table(&report);
        assert!(text.starts_with("Relation   coverage@P95  coverage@P90\n"));
        assert!(text.contains("writtenIn          0.69          0.76"));
    }
}
