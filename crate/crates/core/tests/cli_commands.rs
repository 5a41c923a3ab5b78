mod common;

use std::path::Path;

use common::*;
use kbc::cli::{cmd_calibrate, cmd_estimate, cmd_evaluate, ExitStatus, ProviderConfig, RunConfig};
use kbc::gateway::MockTable;
use kbc::{RelationConfig, Threshold};

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[tokio::test]
async fn evaluate_reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let bundled = tmp.path().join("relations.toml");
    RelationConfig::bundled().save(&bundled).unwrap();
    let a = e2e_config(tmp.path(), "a", &bundled);
    let b = e2e_config(tmp.path(), "b", &bundled);
    let mut text = Vec::new();
    assert_eq!(cmd_evaluate(&a, &mut text).await.unwrap(), ExitStatus::Success);
    cmd_evaluate(&b, &mut Vec::new()).await.unwrap();

    let report = json(&a.output_dir.join("metrics.json"));
    assert_eq!(report["relations"].as_array().unwrap().len(), 2);
    assert!(report["macro_average"]["f1"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8(text).unwrap().contains("Macro-Average"));
    assert_eq!(read_dir_bytes(&a.output_dir), read_dir_bytes(&b.output_dir));
}

#[tokio::test]
async fn missing_gold_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bundled = tmp.path().join("relations.toml");
    RelationConfig::bundled().save(&bundled).unwrap();
    let mut config = e2e_config(tmp.path(), "a", &bundled);
    config.gold = Some(tmp.path().join("nope.tsv"));
    let err = cmd_evaluate(&config, &mut Vec::new()).await.unwrap_err();
    assert_eq!(err.exit_status(), ExitStatus::ConfigError);
    assert_eq!(err.exit_status().code(), 2);
}

#[tokio::test]
async fn calibrate_flags_unreachable_relation() {
    let tmp = tempfile::tempdir().unwrap();
    let bundled = tmp.path().join("relations.toml");
    RelationConfig::bundled().save(&bundled).unwrap();

    // Every gold game gets a confident wrong developer.
    let mut table = MockTable::load(fixtures().join("e2e/mock.json")).unwrap();
    for i in 2000..2010 {
        table.by_subject.insert(format!("Q{i}"), kbc::gateway::MockEntry::new(" Konami", -0.01));
    }
    let table_path = tmp.path().join("mock.json");
    std::fs::write(&table_path, serde_json::to_vec(&table).unwrap()).unwrap();
    let mut config = e2e_config(tmp.path(), "a", &bundled);
    config.provider = ProviderConfig::Mock {
        table: Some(table_path),
        logprobs: true,
        price_per_1k_tokens: 0.02,
    };

    let mut text = Vec::new();
    cmd_calibrate(&config, &mut text).await.unwrap();
    let text = String::from_utf8(text).unwrap();
    assert!(text.contains("flagged: developedBy"), "{text}");
    let relations = RelationConfig::load(&bundled).unwrap();
    assert_eq!(relations.get("developedBy").unwrap().threshold, Some(Threshold::RetainNothing));
    assert!(matches!(relations.get("nativeLanguage").unwrap().threshold, Some(Threshold::Confidence(_))));

    // Same inputs, same thresholds.
    let before = std::fs::read(&bundled).unwrap();
    cmd_calibrate(&config, &mut Vec::new()).await.unwrap();
    assert_eq!(std::fs::read(&bundled).unwrap(), before);
}

fn estimate_config(tmp: &Path, gaps: &Path, price: f64) -> RunConfig {
    RunConfig {
        gap_reports: Some(gaps.to_path_buf()),
        output_dir: tmp.join(format!("out-{price}")),
        cache_dir: tmp.join("cache"),
        provider: ProviderConfig::Mock { table: None, logprobs: true, price_per_1k_tokens: price },
        ..RunConfig::default()
    }
}

async fn estimate_total(config: &RunConfig) -> f64 {
    assert_eq!(cmd_estimate(config, &mut Vec::new()).await.unwrap(), ExitStatus::Success);
    json(&config.output_dir.join("estimate.json"))["total_cost"].as_f64().unwrap()
}

#[tokio::test]
async fn estimate_totals() {
    let tmp = tempfile::tempdir().unwrap();
    let table = fixtures().join("reference/completion_growth.tsv");
    let total = estimate_total(&estimate_config(tmp.path(), &table, 0.02)).await;
    // 46,924,749 queries at 174 tokens and 0.02 per 1K tokens.
    assert!((total - 163_298.13).abs() < 0.01, "{total}");
    let doubled = estimate_total(&estimate_config(tmp.path(), &table, 0.04)).await;
    assert!((doubled - 2.0 * total).abs() < 1e-6);

    let empty = tmp.path().join("empty.tsv");
    std::fs::write(&empty, "relation\tcurrent_statements\tmissing_subjects\n").unwrap();
    assert_eq!(estimate_total(&estimate_config(tmp.path(), &empty, 0.02)).await, 0.0);
}

// The per-relation table sums to about $163k, 2.8% under the $168k quoted
// alongside it; the 48M-query figure is checked in the acceptance suite.
#[tokio::test]
#[ignore = "table totals give $163,298, 2.8% from $168,000"]
async fn estimate_table_matches_quoted_total() {
    let tmp = tempfile::tempdir().unwrap();
    let table = fixtures().join("reference/completion_growth.tsv");
    let total = estimate_total(&estimate_config(tmp.path(), &table, 0.02)).await;
    assert!((total - 168_000.0).abs() / 168_000.0 <= 0.01, "{total}");
}
