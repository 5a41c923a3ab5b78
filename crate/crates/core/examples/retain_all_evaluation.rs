//! Scores raw answers against gold facts with every answer kept.

use kbc::ingest::GoldDataset;
use kbc::prompting::parse_answer;
use kbc::scoring::{render_metrics_table, retain_all_metrics};
use kbc::{EntityRef, Fact, PromptVariant, ScoredPrediction};

fn main() {
    let mut gold = GoldDataset::new("example");
    let facts = [
        ("Q1", "Ingrid Bergman", &["Swedish"][..]),
        ("Q2", "Rosa Estaràs", &["Spanish", "Catalan"][..]),
        ("Q3", "Bill Byrge", &["English"][..]),
    ];
    for (id, label, objects) in facts {
        gold.insert(Fact::new(
            EntityRef::new(id, label),
            "P103",
            objects.iter().map(|o| EntityRef::unlinked(*o)),
        ));
    }
    let raw = [("Q1", "Ingrid Bergman", " Swedish"), ("Q2", "Rosa Estaràs", " Spanish"), ("Q3", "Bill Byrge", " Don't know")];
    let predictions: Vec<ScoredPrediction> = raw
        .iter()
        .map(|(id, label, text)| {
            ScoredPrediction::new(
                EntityRef::new(*id, *label),
                "P103",
                parse_answer(text, PromptVariant::Standard),
                None,
                *text,
                PromptVariant::Standard,
            )
        })
        .collect();
    let report = retain_all_metrics(&predictions, &gold).unwrap();
    print!("{}", render_metrics_table(&report));
}
