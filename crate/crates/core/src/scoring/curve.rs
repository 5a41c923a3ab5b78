use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::ingest::GoldDataset;
use crate::model::{RelationSpec, ScoredPrediction, Threshold};

/// Precision band searched by [`calibrate_threshold`].
pub const DEFAULT_PRECISION_RANGE: (f64, f64) = (0.75, 0.95);

/// Confidence-sorted correctness list.
///
/// Items are sorted by descending confidence; the sort is stable, so tied
/// items keep their input order. `total` is the coverage denominator and may
/// exceed the item count when abstentions are left out of the ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    items: Vec<(f64, bool)>,
    total: usize,
    hits: Vec<usize>,
}

/// Result of a recall-at-precision query on a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallAtPrecision {
    pub target: f64,
    /// Retained fraction of the list (`coverage@P`).
    pub coverage: f64,
    pub threshold: Threshold,
    pub retained: usize,
    /// Precision of the retained prefix; `None` when nothing is retained.
    pub precision: Option<f64>,
}

impl ThresholdCurve {
    pub fn new(mut items: Vec<(f64, bool)>, total: usize) -> Result<Self, ScoringError> {
        if items.is_empty() && total == 0 {
            return Err(ScoringError::EmptyList);
        }
        if items.len() > total {
            return Err(ScoringError::TotalTooSmall { items: items.len(), total });
        }
        if let Some(&(c, _)) = items.iter().find(|(c, _)| !c.is_finite()) {
            return Err(ScoringError::InvalidConfidence(c));
        }
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut hits = Vec::with_capacity(items.len() + 1);
        hits.push(0);
        for &(_, ok) in &items {
            hits.push(hits.last().unwrap() + usize::from(ok));
        }
        Ok(Self { items, total, hits })
    }

    /// Curve whose coverage denominator is the item count.
    pub fn from_pairs(items: Vec<(f64, bool)>) -> Result<Self, ScoringError> {
        let total = items.len();
        Self::new(items, total)
    }

    pub fn items(&self) -> &[(f64, bool)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// A cut after the first `m` items is admissible when it does not split
    /// a run of equal confidences.
    pub fn is_admissible(&self, m: usize) -> bool {
        let n = self.items.len();
        (1..=n).contains(&m) && (m == n || self.items[m - 1].0 != self.items[m].0)
    }

    /// Admissible cut lengths in increasing order.
    pub fn cuts(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.items.len()).filter(|&m| self.is_admissible(m))
    }

    pub fn precision(&self, m: usize) -> f64 {
        self.hits[m] as f64 / m as f64
    }

    pub fn coverage(&self, m: usize) -> f64 {
        m as f64 / self.total as f64
    }

    /// Confidence of the `m`-th item (1-based), the threshold that retains
    /// exactly the first `m` items.
    pub fn threshold_at(&self, m: usize) -> Threshold {
        Threshold::Confidence(self.items[m - 1].0)
    }

    fn result(&self, target: f64, m: Option<usize>) -> RecallAtPrecision {
        match m {
            Some(m) => RecallAtPrecision {
                target,
                coverage: self.coverage(m),
                threshold: self.threshold_at(m),
                retained: m,
                precision: Some(self.precision(m)),
            },
            None => RecallAtPrecision {
                target,
                coverage: 0.0,
                threshold: Threshold::RetainNothing,
                retained: 0,
                precision: None,
            },
        }
    }

    /// Longest admissible prefix whose precision is strictly above `target`.
    pub fn recall_at_precision(&self, target: f64) -> Result<RecallAtPrecision, ScoringError> {
        if !(target > 0.0 && target < 1.0) {
            return Err(ScoringError::InvalidTarget(target));
        }
        let best = self.cuts().filter(|&m| self.precision(m) > target).last();
        Ok(self.result(target, best))
    }
}

/// Coverage and threshold for the longest admissible prefix with precision
/// strictly above `target`. Coverage is relative to the list length.
pub fn recall_at_precision(items: &[(f64, bool)], target: f64) -> Result<(f64, Threshold), ScoringError> {
    if items.is_empty() {
        return Err(ScoringError::EmptyList);
    }
    let r = ThresholdCurve::from_pairs(items.to_vec())?.recall_at_precision(target)?;
    Ok((r.coverage, r.threshold))
}

/// Outcome of threshold calibration for one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub relation: String,
    pub threshold: Threshold,
    pub coverage: f64,
    pub precision: Option<f64>,
    pub retained: usize,
    pub total: usize,
    /// No cut landed inside the precision range; the threshold comes from
    /// the recall-at-precision fallback at the range's lower bound.
    pub low_confidence: bool,
}

impl Calibration {
    /// Calibration that retains nothing; generation is pointless.
    pub fn failed(&self) -> bool {
        self.threshold == Threshold::RetainNothing
    }
}

/// Picks the cut with the highest precision inside `[lo, hi]`, preferring
/// more coverage among equal precisions.
pub fn calibrate_curve(
    relation: &str,
    curve: &ThresholdCurve,
    (lo, hi): (f64, f64),
) -> Result<Calibration, ScoringError> {
    if !(lo > 0.0 && lo < hi && hi <= 1.0) {
        return Err(ScoringError::InvalidRange { lo, hi });
    }
    if curve.is_empty() {
        return Err(ScoringError::EmptyList);
    }
    let mut best: Option<(usize, f64)> = None;
    for m in curve.cuts() {
        let p = curve.precision(m);
        if p < lo || p > hi {
            continue;
        }
        // Later cuts have more coverage, so >= keeps the widest among ties.
        if best.is_none_or(|(_, bp)| p >= bp) {
            best = Some((m, p));
        }
    }
    if let Some((m, p)) = best {
        return Ok(Calibration {
            relation: relation.to_string(),
            threshold: curve.threshold_at(m),
            coverage: curve.coverage(m),
            precision: Some(p),
            retained: m,
            total: curve.total(),
            low_confidence: false,
        });
    }
    let fallback = curve.recall_at_precision(lo)?;
    tracing::warn!(relation, lo, hi, "no cut inside precision range; using fallback");
    Ok(Calibration {
        relation: relation.to_string(),
        threshold: fallback.threshold,
        coverage: fallback.coverage,
        precision: fallback.precision,
        retained: fallback.retained,
        total: curve.total(),
        low_confidence: true,
    })
}

/// Ranking input for a set of predictions scored against gold.
///
/// An item is correct when its predicted labels meet the gold objects on
/// normalized labels. Abstentions are not ranked but count toward the
/// returned total.
pub fn curve_items(
    predictions: &[ScoredPrediction],
    gold: &GoldDataset,
) -> Result<(Vec<(f64, bool)>, usize), ScoringError> {
    let mut items = Vec::with_capacity(predictions.len());
    for p in predictions {
        let fact = gold.get(&p.relation, &p.subject.id).ok_or_else(|| ScoringError::NotInGold {
            relation: p.relation.clone(),
            subject: p.subject.id.clone(),
        })?;
        if p.answer.is_abstain() {
            continue;
        }
        let confidence = p.confidence.ok_or_else(|| ScoringError::MissingConfidence {
            prediction: p.id.clone(),
        })?;
        let gold_set = fact.normalized_objects();
        let correct = p.predicted_set().iter().any(|l| gold_set.contains(l));
        items.push((confidence, correct));
    }
    Ok((items, predictions.len()))
}

/// Calibrates the threshold for `spec` from its predictions on gold subjects.
pub fn calibrate_threshold(
    spec: &RelationSpec,
    predictions: &[ScoredPrediction],
    gold: &GoldDataset,
    range: (f64, f64),
) -> Result<Calibration, ScoringError> {
    let own: Vec<ScoredPrediction> = predictions
        .iter()
        .filter(|p| p.relation == spec.id)
        .cloned()
        .collect();
    if own.is_empty() {
        return Err(ScoringError::EmptyList);
    }
    let (items, total) = curve_items(&own, gold)?;
    if items.is_empty() {
        // Everything abstained: nothing to retain.
        return Ok(Calibration {
            relation: spec.id.clone(),
            threshold: Threshold::RetainNothing,
            coverage: 0.0,
            precision: None,
            retained: 0,
            total,
            low_confidence: true,
        });
    }
    calibrate_curve(&spec.id, &ThresholdCurve::new(items, total)?, range)
}

/// Predictions at or above `threshold` that are not abstentions, in
/// descending confidence order (stable). Predictions without a confidence
/// score are never retained.
pub fn filter_by_threshold(predictions: &[ScoredPrediction], threshold: Threshold) -> Vec<ScoredPrediction> {
    let mut kept: Vec<ScoredPrediction> = predictions
        .iter()
        .filter(|p| !p.answer.is_abstain())
        .filter(|p| p.confidence.is_some_and(|c| threshold.admits(c)))
        .cloned()
        .collect();
    kept.sort_by(|a, b| b.confidence.unwrap().total_cmp(&a.confidence.unwrap()));
    kept
}
