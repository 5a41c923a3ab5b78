#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kbc::cli::{cmd_calibrate, cmd_complete, ExitStatus, RunConfig};
use kbc::RelationConfig;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Run config for the end-to-end fixture with its cache and output under
/// `root/<name>`.
pub fn e2e_config(root: &Path, name: &str, relations: &Path) -> RunConfig {
    let mut c = RunConfig::load(fixtures().join("e2e/run.toml")).unwrap();
    c.relations = Some(relations.to_path_buf());
    c.cache_dir = root.join(name).join("cache");
    c.output_dir = root.join(name).join("out");
    c
}

/// Writes the bundled relations to `root/relations.toml` and calibrates the
/// e2e relations in place.
pub async fn calibrated_relations(root: &Path) -> PathBuf {
    let path = root.join("relations.toml");
    RelationConfig::bundled().save(&path).unwrap();
    let config = e2e_config(root, "calibrate", &path);
    let mut sink = Vec::new();
    let status = cmd_calibrate(&config, &mut sink).await.unwrap();
    assert_eq!(status, ExitStatus::Success, "{}", String::from_utf8_lossy(&sink));
    path
}

pub async fn complete(config: &RunConfig) -> ExitStatus {
    let mut sink = Vec::new();
    cmd_complete(config, &mut sink).await.unwrap()
}

/// Every file in `dir`, by name.
pub fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

pub fn transcript_lines(config: &RunConfig) -> usize {
    let path = config.cache_dir.join("transcripts/mock.jsonl");
    std::fs::read_to_string(path).map(|t| t.lines().count()).unwrap_or(0)
}

/// (fixture file, rendered prompt) pairs for every golden prompt.
pub fn golden_cases() -> Vec<(&'static str, String)> {
    use kbc::prompting::{build_prompt, SearchSnippet};
    use kbc::{EntityRef, PromptVariant};

    let bundled = RelationConfig::bundled();
    let plain = |name: &str, subject: &str, variant: PromptVariant| {
        let spec = bundled.get(name).unwrap();
        build_prompt(spec, &EntityRef::new("Q0", subject), variant, None).unwrap().text
    };
    // Context goldens show seven examples and query the eighth with its own
    // snippet.
    let with_context = |name: &str| {
        let mut spec = bundled.get(name).unwrap().clone();
        spec.few_shot_count = 7;
        let query = spec.few_shot_examples.iter().filter(|e| !e.dont_know).nth(7).unwrap().clone();
        let snippet = SearchSnippet::new(
            format!("{} {}", query.subject, spec.prompt_label),
            query.context.clone().unwrap(),
            "https://example.org",
        );
        build_prompt(&spec, &EntityRef::new("Q0", &query.subject), PromptVariant::WithContext, Some(&snippet))
            .unwrap()
            .text
    };
    vec![
        ("native_language_standard.txt", plain("nativeLanguage", "Visvanath Kar", PromptVariant::Standard)),
        ("developed_by_standard.txt", plain("developedBy", "The Incredible Hulk", PromptVariant::Standard)),
        ("employed_by_standard.txt", plain("employedBy", "John Gruber", PromptVariant::Standard)),
        ("produced_by_dont_know.txt", plain("producedBy", "Eikeviken", PromptVariant::DontKnow)),
        ("spoken_language_dont_know.txt", plain("spokenLanguage", "Albrecht von Quadt", PromptVariant::DontKnow)),
        ("developed_by_chat.txt", plain("developedBy", "The Incredible Hulk", PromptVariant::Chat)),
        ("in_continent_context.txt", with_context("inContinent")),
        ("work_location_context.txt", with_context("workLocation")),
    ]
}

pub fn golden_text(file: &str) -> String {
    std::fs::read_to_string(fixtures().join("prompts").join(file)).unwrap()
}
