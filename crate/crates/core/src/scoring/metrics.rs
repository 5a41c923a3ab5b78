use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::ingest::GoldDataset;
use crate::model::ScoredPrediction;

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }

    /// Unweighted mean of each component.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Prf>) -> Prf {
        let (mut p, mut r, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
        for x in items {
            p += x.precision;
            r += x.recall;
            f += x.f1;
            n += 1;
        }
        if n == 0 {
            return Prf { precision: 0.0, recall: 0.0, f1: 0.0 };
        }
        let n = n as f64;
        Prf { precision: p / n, recall: r / n, f1: f / n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub relation: String,
    #[serde(flatten)]
    pub scores: Prf,
    pub subjects: usize,
    pub abstained: usize,
    /// Σ |predicted ∩ gold|
    pub hits: usize,
    /// Σ |predicted|
    pub predicted: usize,
    /// Σ |gold|
    pub gold: usize,
}

/// Retain-all evaluation, one row per relation plus the macro average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub relations: Vec<RelationMetrics>,
    pub macro_average: Prf,
}

impl MetricsReport {
    pub fn get(&self, relation: &str) -> Option<&RelationMetrics> {
        self.relations.iter().find(|r| r.relation == relation)
    }
}

#[derive(Default)]
struct Tally {
    subjects: usize,
    abstained: usize,
    hits: usize,
    predicted: usize,
    gold: usize,
}

/// Scores every prediction against gold, summing counts over subjects
/// within a relation before dividing.
pub fn retain_all_metrics(
    predictions: &[ScoredPrediction],
    gold: &GoldDataset,
) -> Result<MetricsReport, ScoringError> {
    if predictions.is_empty() {
        return Err(ScoringError::EmptyList);
    }
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for p in predictions {
        let fact = gold.get(&p.relation, &p.subject.id).ok_or_else(|| ScoringError::NotInGold {
            relation: p.relation.clone(),
            subject: p.subject.id.clone(),
        })?;
        let gold_set = fact.normalized_objects();
        let t = tallies.entry(p.relation.as_str()).or_default();
        t.subjects += 1;
        t.gold += gold_set.len();
        if p.answer.is_abstain() {
            t.abstained += 1;
            continue;
        }
        let predicted = p.predicted_set();
        t.predicted += predicted.len();
        t.hits += predicted.intersection(&gold_set).count();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let relations: Vec<RelationMetrics> = tallies
        .into_iter()
        .map(|(relation, t)| RelationMetrics {
            relation: relation.to_string(),
            scores: Prf::new(ratio(t.hits, t.predicted), ratio(t.hits, t.gold)),
            subjects: t.subjects,
            abstained: t.abstained,
            hits: t.hits,
            predicted: t.predicted,
            gold: t.gold,
        })
        .collect();
    let macro_average = Prf::mean(relations.iter().map(|r| &r.scores));
    Ok(MetricsReport { relations, macro_average })
}
