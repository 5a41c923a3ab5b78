use std::collections::BTreeMap;

use kbc::{RelationSpec, ScoredPrediction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ReviewError;

/// Total number of items to review across all relations.
pub const DEFAULT_SAMPLE_SIZE: usize = 800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub prediction_id: String,
    pub subject_id: String,
    pub subject_label: String,
    pub relation_phrase: String,
    pub predicted_object: String,
    pub confidence: Option<f64>,
    pub search_query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewBatch {
    pub id: String,
    pub relation: String,
    pub seed: u64,
    pub items: Vec<ReviewItem>,
}

/// Query annotators can paste into a search engine.
pub fn search_query(subject_label: &str, relation_phrase: &str) -> String {
    format!("{subject_label} {relation_phrase}")
}

/// Draws `n` of the relation's retained, non-abstaining predictions without
/// replacement. Candidates are ordered by prediction id before sampling, so
/// the batch depends only on the candidate set and the seed.
pub fn create_batch(
    retained: &[ScoredPrediction],
    spec: &RelationSpec,
    n: usize,
    seed: u64,
) -> Result<ReviewBatch, ReviewError> {
    let mut pool: Vec<&ScoredPrediction> = retained
        .iter()
        .filter(|p| p.relation == spec.id && !p.answer.is_abstain())
        .collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    pool.dedup_by(|a, b| a.id == b.id);
    if n > pool.len() {
        return Err(ReviewError::SampleTooLarge {
            relation: spec.id.clone(),
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<ReviewItem> = rand::seq::index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| {
            let p = pool[i];
            let label = p.subject.display_label().to_string();
            ReviewItem {
                prediction_id: p.id.clone(),
                subject_id: p.subject.id.clone(),
                search_query: search_query(&label, &spec.prompt_label),
                subject_label: label,
                relation_phrase: spec.prompt_label.clone(),
                predicted_object: p.answer.labels()[0].clone(),
                confidence: p.confidence,
            }
        })
        .collect();
    Ok(ReviewBatch {
        id: format!("{}-s{seed}-n{n}", spec.id),
        relation: spec.id.clone(),
        seed,
        items,
    })
}

/// Splits `total` review slots across relations in proportion to their
/// retained counts, by largest remainder (ties go to the earlier relation
/// id). No relation gets more slots than it has predictions.
pub fn allocate_samples(total: usize, retained: &BTreeMap<String, usize>) -> BTreeMap<String, usize> {
    let available: usize = retained.values().sum();
    if total >= available {
        return retained.clone();
    }
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    let mut remainders = Vec::new();
    for (relation, &count) in retained {
        let exact = total as f64 * count as f64 / available as f64;
        let floor = exact.floor() as usize;
        out.insert(relation.clone(), floor);
        remainders.push((exact - floor as f64, relation.clone()));
    }
    let assigned: usize = out.values().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    for (_, relation) in remainders.into_iter().take(total - assigned) {
        *out.get_mut(&relation).expect("allocated") += 1;
    }
    out
}
