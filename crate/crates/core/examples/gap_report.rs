//! Counts statements and missing subjects for each bundled relation.
//!
//! Uses the bundled fixture KB by default; pass a SPARQL endpoint URL to
//! query a live service instead (results are cached under the temp dir).

use kbc::ingest::{find_all_missing_subjects, gap_report, CachedEndpoint, FixtureKb, HttpSparqlEndpoint, SparqlEndpoint};
use kbc::RelationConfig;

#[tokio::main]
async fn main() {
    let endpoint: Box<dyn SparqlEndpoint> = match std::env::args().nth(1) {
        Some(url) => Box::new(CachedEndpoint::new(
            HttpSparqlEndpoint::new(url).unwrap(),
            std::env::temp_dir().join("kbc-sparql-cache"),
        )),
        None => Box::new(FixtureKb::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/e2e/kb.tsv")).unwrap()),
    };
    let relations = RelationConfig::bundled();
    for name in ["nativeLanguage", "developedBy"] {
        let spec = relations.get(name).unwrap();
        match gap_report(spec, endpoint.as_ref()).await {
            Ok(r) => println!("{name:<16} {:>8} statements {:>8} missing", r.current_statements, r.missing_subjects),
            Err(e) => {
                eprintln!("{name}: {e}");
                continue;
            }
        }
        let subjects = find_all_missing_subjects(spec, endpoint.as_ref(), 25, 4).await.unwrap();
        let preview: Vec<String> = subjects.iter().take(5).map(|s| format!("{} ({})", s.label, s.id)).collect();
        println!("  first missing: {}", preview.join(", "));
    }
}
