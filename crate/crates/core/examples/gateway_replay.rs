//! Sends prompts through the gateway with a transcript, then replays them
//! without touching the provider.

use std::sync::Arc;

use kbc::gateway::{batch_generate, Gateway, GenerationRequest, MockProvider, MockTable, Transcript};
use kbc::prompting::build_prompt;
use kbc::{EntityRef, PromptVariant, RelationConfig};

#[tokio::main]
async fn main() {
    let spec = RelationConfig::bundled().get("nativeLanguage").unwrap().clone();
    let dir = tempfile_dir();
    let transcript_path = dir.join("transcript.jsonl");

    let mut provider = MockProvider::from_table(MockTable::default());
    provider.insert_subject("Q1", " Swedish\nQ: Someone else", -0.05);
    provider.insert_subject("Q2", " French", -1.2);
    let provider = Arc::new(provider);

    let requests: Vec<GenerationRequest> = [("Q1", "Ingrid Bergman"), ("Q2", "Jean Reno"), ("Q3", "Unknown Person")]
        .iter()
        .map(|(id, label)| {
            GenerationRequest::new(build_prompt(&spec, &EntityRef::new(*id, *label), PromptVariant::Standard, None).unwrap())
        })
        .collect();

    let gateway = Gateway::new(provider.clone()).with_transcript(Transcript::open(&transcript_path).unwrap());
    for g in batch_generate(&requests, &gateway, 2).await {
        let g = g.unwrap();
        println!("{:<12} confidence {:.3}  replayed {}", g.text, g.confidence().unwrap(), g.replayed);
    }
    println!("provider calls: {}", provider.calls());

    let replay = Gateway::new(provider.clone()).with_transcript(Transcript::open(&transcript_path).unwrap());
    for g in batch_generate(&requests, &replay, 2).await {
        let g = g.unwrap();
        println!("{:<12} confidence {:.3}  replayed {}", g.text, g.confidence().unwrap(), g.replayed);
    }
    println!("provider calls after replay: {}", provider.calls());
    std::fs::remove_dir_all(dir).ok();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("kbc-gateway-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
