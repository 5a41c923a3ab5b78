//! Samples a review batch, records ratings from two annotators and prints
//! the resulting accuracy report and acceptance decision.

use chrono::Utc;
use kbc::{Answer, EntityRef, LikertValue, PromptVariant, RelationConfig, ScoredPrediction};
use kbc_review::{accept_relation, allocate_samples, create_batch, RatingRequest, ReviewStore, DEFAULT_SAMPLE_SIZE};

fn main() {
    let spec = RelationConfig::bundled().get("inContinent").unwrap().clone();
    let retained: Vec<ScoredPrediction> = (0..40)
        .map(|i| {
            ScoredPrediction::new(
                EntityRef::new(format!("Q{}", 9000 + i), format!("Volcano {i}")),
                spec.id.clone(),
                Answer::Objects(vec!["south america".into()]),
                Some(0.97),
                " South America",
                PromptVariant::Standard,
            )
        })
        .collect();

    let shares = allocate_samples(
        DEFAULT_SAMPLE_SIZE,
        &[("P30".to_string(), 551_263), ("P103".to_string(), 3_856_831)].into(),
    );
    println!("sample allocation over two relations: {shares:?}");

    let path = std::env::temp_dir().join(format!("kbc-review-{}.jsonl", std::process::id()));
    let store = ReviewStore::open(&path).unwrap();
    let batch = store.add_batch(create_batch(&retained, &spec, 8, 42).unwrap()).unwrap();
    println!("batch {} with {} items; first query: {:?}", batch.id, batch.items.len(), batch.items[0].search_query);

    let first = [
        LikertValue::Correct,
        LikertValue::Correct,
        LikertValue::Likely,
        LikertValue::Correct,
        LikertValue::False,
        LikertValue::Correct,
        LikertValue::Implausible,
        LikertValue::Correct,
    ];
    for (annotator, values) in [("ann-1", first), ("ann-2", first.map(|v| if v == LikertValue::Likely { LikertValue::False } else { v }))] {
        for (item, value) in batch.items.iter().zip(values) {
            let request = RatingRequest {
                prediction_id: item.prediction_id.clone(),
                value,
                annotator: annotator.into(),
                batch_id: None,
            };
            store.record_rating(request, Utc::now()).unwrap();
        }
    }
    let report = store.relation_report(&spec.id).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    println!("decision at target {}: {:?}", spec.target_precision, accept_relation(&report, &spec));
    std::fs::remove_file(path).ok();
}
