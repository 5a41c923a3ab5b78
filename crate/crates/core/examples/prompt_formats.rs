//! Renders every prompt variant for one subject and parses a few answers.

use kbc::prompting::{build_prompt, parse_answer, SearchSnippet};
use kbc::{EntityRef, PromptVariant, RelationConfig};

fn main() {
    let relations = RelationConfig::bundled();

    let spec = relations.get("developedBy").unwrap();
    let subject = EntityRef::new("Q1", "The Incredible Hulk");
    for variant in [PromptVariant::Standard, PromptVariant::Chat] {
        let prompt = build_prompt(spec, &subject, variant, None).unwrap();
        println!("== {variant} ({} tokens est.)\n{}\n", prompt.token_estimate, prompt.text);
    }

    let spec = relations.get("producedBy").unwrap();
    let prompt = build_prompt(spec, &EntityRef::new("Q2", "Eikeviken"), PromptVariant::DontKnow, None).unwrap();
    println!("== dont_know\n{}\n", prompt.text);

    let spec = relations.get("inContinent").unwrap();
    let snippet = SearchSnippet::new(
        "Hillary Canyon continent",
        "Hillary Canyon is an undersea canyon in the Ross Sea, Antarctica.",
        "https://example.org/hillary-canyon",
    );
    let prompt = build_prompt(spec, &EntityRef::new("Q3", "Hillary Canyon"), PromptVariant::WithContext, Some(&snippet))
        .unwrap();
    let tail: Vec<&str> = prompt.text.lines().rev().take(3).collect();
    println!("== with_context (last block)\n{}\n", tail.into_iter().rev().collect::<Vec<_>>().join("\n"));

    for raw in [" Nintendo, Rare\nQ: next", " Don't know", " English # Welsh", ""] {
        println!("{raw:?} -> {:?}", parse_answer(raw, PromptVariant::Standard));
    }
}
