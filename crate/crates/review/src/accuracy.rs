use std::collections::BTreeMap;

use kbc::{LikertValue, RelationSpec};
use serde::{Deserialize, Serialize};

use crate::ReviewError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualAccuracyReport {
    pub relation: String,
    pub sampled: usize,
    pub rated: usize,
    /// Resolved value per rated item, counted.
    pub counts: BTreeMap<LikertValue, usize>,
    /// (correct + likely) / rated.
    pub accuracy: f64,
    /// rated / sampled.
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Rejected,
}

/// Majority value among annotators; ties resolve to `Unknown`, which counts
/// against the prediction. `None` when nobody rated the item.
pub fn resolve_item(values: &[LikertValue]) -> Option<LikertValue> {
    let mut tally: BTreeMap<LikertValue, usize> = BTreeMap::new();
    for v in values {
        *tally.entry(*v).or_default() += 1;
    }
    let top = *tally.values().max()?;
    let mut leaders = tally.iter().filter(|(_, n)| **n == top).map(|(v, _)| *v);
    let first = leaders.next()?;
    Some(if leaders.next().is_some() { LikertValue::Unknown } else { first })
}

/// Folds per-item annotator ratings into an accuracy report. `per_item`
/// maps each sampled item to the current rating of every annotator who
/// rated it.
pub fn manual_accuracy(
    relation: &str,
    sampled: usize,
    per_item: &BTreeMap<String, Vec<LikertValue>>,
) -> Result<ManualAccuracyReport, ReviewError> {
    let mut counts: BTreeMap<LikertValue, usize> = LikertValue::ALL.iter().map(|v| (*v, 0)).collect();
    let mut rated = 0;
    for values in per_item.values() {
        if let Some(v) = resolve_item(values) {
            *counts.get_mut(&v).expect("all values present") += 1;
            rated += 1;
        }
    }
    if rated == 0 {
        return Err(ReviewError::NoRatings(relation.to_string()));
    }
    let good: usize = counts.iter().filter(|(v, _)| v.counts_as_true()).map(|(_, n)| n).sum();
    Ok(ManualAccuracyReport {
        relation: relation.to_string(),
        sampled,
        rated,
        counts,
        accuracy: good as f64 / rated as f64,
        coverage: if sampled == 0 { 0.0 } else { rated as f64 / sampled as f64 },
    })
}

pub fn accept_relation(report: &ManualAccuracyReport, spec: &RelationSpec) -> Decision {
    if report.accuracy >= spec.target_precision {
        Decision::Accepted
    } else {
        Decision::Rejected
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kbc::RelationConfig;
    use proptest::prelude::*;
    use LikertValue::*;

    fn single(values: &[LikertValue]) -> BTreeMap<String, Vec<LikertValue>> {
        values.iter().enumerate().map(|(i, v)| (format!("p{i}"), vec![*v])).collect()
    }

    fn report_with(accuracy: f64) -> ManualAccuracyReport {
        ManualAccuracyReport {
            relation: "P1".into(),
            sampled: 1,
            rated: 1,
            counts: BTreeMap::new(),
            accuracy,
            coverage: 1.0,
        }
    }

    #[test]
    fn two_true_of_four() {
        let r = manual_accuracy("P1", 4, &single(&[Correct, Likely, False, Unknown])).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.counts.values().sum::<usize>(), r.rated);
        assert_eq!(manual_accuracy("P1", 3, &single(&[Correct; 3])).unwrap().accuracy, 1.0);
    }

    #[test]
    fn no_ratings_is_an_error() {
        let mut items = BTreeMap::new();
        items.insert("p0".to_string(), Vec::new());
        assert!(matches!(manual_accuracy("P1", 1, &items), Err(ReviewError::NoRatings(_))));
    }

    #[test]
    fn ties_are_pessimistic() {
        assert_eq!(resolve_item(&[Correct, False]), Some(Unknown));
        assert_eq!(resolve_item(&[Correct, Correct, False]), Some(Correct));
        assert_eq!(resolve_item(&[Correct, Likely]), Some(Unknown));
        assert_eq!(resolve_item(&[]), None);
    }

    #[test]
    fn acceptance_gate() {
        let mut spec = RelationConfig::bundled().get("nativeLanguage").unwrap().clone();
        spec.target_precision = 0.90;
        assert_eq!(accept_relation(&report_with(0.92), &spec), Decision::Accepted);
        assert_eq!(accept_relation(&report_with(0.24), &spec), Decision::Rejected);
        assert_eq!(accept_relation(&report_with(0.90), &spec), Decision::Accepted);
    }

    fn value() -> impl Strategy<Value = LikertValue> {
        proptest::sample::select(LikertValue::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn order_of_ratings_does_not_matter(
            items in proptest::collection::vec(proptest::collection::vec(value(), 1..5), 1..30),
            seed in any::<u64>(),
        ) {
            let forward: BTreeMap<String, Vec<LikertValue>> =
                items.iter().enumerate().map(|(i, v)| (format!("p{i}"), v.clone())).collect();
            let shuffled: BTreeMap<String, Vec<LikertValue>> = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut v = v.clone();
                    let k = (seed as usize).wrapping_add(i) % v.len();
                    v.rotate_left(k);
                    v.reverse();
                    (format!("p{i}"), v)
                })
                .collect();
            let a = manual_accuracy("P1", items.len(), &forward).unwrap();
            prop_assert_eq!(&a, &manual_accuracy("P1", items.len(), &shuffled).unwrap());
            prop_assert!((0.0..=1.0).contains(&a.accuracy));
            prop_assert_eq!(a.counts.values().sum::<usize>(), a.rated);
        }
    }
}
