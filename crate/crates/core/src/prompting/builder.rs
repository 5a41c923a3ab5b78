use serde::{Deserialize, Serialize};

use super::tokens::{TokenEstimator, WordPunctEstimator};
use super::{PromptError, SearchSnippet};
use crate::model::{EntityRef, FewShotExample, PromptVariant, RelationSpec};

/// Object separator on rendered `A:` lines.
pub const ANSWER_SEPARATOR: &str = " # ";
pub const DONT_KNOW: &str = "Don't know";

/// A rendered prompt for one (subject, relation) query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub token_estimate: usize,
    pub variant: PromptVariant,
    pub subject: EntityRef,
    pub relation: String,
}

impl Prompt {
    pub fn recount(&mut self, estimator: &dyn TokenEstimator) {
        self.token_estimate = estimator.estimate(&self.text);
    }
}

/// Renders an object list the way few-shot `A:` lines show it.
pub fn format_answer(objects: &[String]) -> String {
    objects.join(ANSWER_SEPARATOR)
}

fn question_line(out: &mut String, subject: &str, prompt_label: &str) {
    out.push_str("Q: ");
    out.push_str(subject);
    out.push_str(" # ");
    out.push_str(prompt_label);
    out.push('\n');
}

fn context_line(out: &mut String, snippet: &str) {
    out.push_str("C: ");
    out.push_str(snippet);
    out.push('\n');
}

/// Chooses and orders the in-context examples for a variant.
pub fn select_examples(
    spec: &RelationSpec,
    variant: PromptVariant,
) -> Result<Vec<&FewShotExample>, PromptError> {
    let k = spec.few_shot_count;
    let answered: Vec<&FewShotExample> =
        spec.few_shot_examples.iter().filter(|e| !e.dont_know).collect();
    let flagged: Vec<&FewShotExample> =
        spec.few_shot_examples.iter().filter(|e| e.dont_know).collect();
    match variant {
        PromptVariant::Chat => Ok(Vec::new()),
        PromptVariant::Standard | PromptVariant::WithContext => {
            if answered.len() < k {
                return Err(PromptError::Config(format!(
                    "{}: {k} examples requested but only {} answered examples configured",
                    spec.name,
                    answered.len()
                )));
            }
            let chosen = answered[..k].to_vec();
            if variant == PromptVariant::WithContext {
                if let Some(ex) = chosen.iter().find(|e| e.context.is_none()) {
                    return Err(PromptError::Config(format!(
                        "{}: example `{}` has no context snippet",
                        spec.name, ex.subject
                    )));
                }
            }
            Ok(chosen)
        }
        PromptVariant::DontKnow => {
            let n_flagged = k.div_ceil(2);
            let n_answered = k - n_flagged;
            if flagged.len() < n_flagged {
                return Err(PromptError::Precondition(format!(
                    "{}: don't-know prompting with k={k} needs {n_flagged} don't-know examples, found {}",
                    spec.name,
                    flagged.len()
                )));
            }
            if answered.len() < n_answered {
                return Err(PromptError::Config(format!(
                    "{}: don't-know prompting with k={k} needs {n_answered} answered examples, found {}",
                    spec.name,
                    answered.len()
                )));
            }
            // Alternate the two classes, leading with the larger one (answered
            // on a tie) so that neither class clusters.
            let mut a = answered[..n_answered].iter();
            let mut f = flagged[..n_flagged].iter();
            let mut take_answered = n_answered >= n_flagged;
            let mut out = Vec::with_capacity(k);
            while out.len() < k {
                let next = if take_answered { a.next() } else { f.next() };
                match next {
                    Some(ex) => out.push(*ex),
                    None => out.extend(if take_answered { f.by_ref() } else { a.by_ref() }),
                }
                take_answered = !take_answered;
            }
            Ok(out)
        }
    }
}

/// Builds the prompt text for `subject` under `spec` and `variant`.
///
/// Completion-style variants render one `Q:`/`A:` block per selected example
/// (with a `C:` line for context prompts) followed by the query block, which
/// ends in `A:`.
pub fn build_prompt(
    spec: &RelationSpec,
    subject: &EntityRef,
    variant: PromptVariant,
    context: Option<&SearchSnippet>,
) -> Result<Prompt, PromptError> {
    build_prompt_with(spec, subject, variant, context, &WordPunctEstimator::default())
}

pub fn build_prompt_with(
    spec: &RelationSpec,
    subject: &EntityRef,
    variant: PromptVariant,
    context: Option<&SearchSnippet>,
    estimator: &dyn TokenEstimator,
) -> Result<Prompt, PromptError> {
    if variant == PromptVariant::WithContext && context.is_none() {
        return Err(PromptError::Precondition(format!(
            "{}: context prompt for `{}` needs a search snippet",
            spec.name,
            subject.display_label()
        )));
    }
    let text = if variant == PromptVariant::Chat {
        let template = spec.chat_template.as_deref().ok_or_else(|| {
            PromptError::Config(format!("{}: no chat_template configured", spec.name))
        })?;
        template.replace("{subject}", subject.display_label())
    } else {
        let examples = select_examples(spec, variant)?;
        let mut text = String::new();
        for ex in examples {
            question_line(&mut text, &ex.subject, &spec.prompt_label);
            if variant == PromptVariant::WithContext {
                context_line(&mut text, ex.context.as_deref().unwrap_or_default());
            }
            text.push_str("A: ");
            if ex.dont_know {
                text.push_str(DONT_KNOW);
            } else {
                text.push_str(&format_answer(&ex.objects));
            }
            text.push('\n');
        }
        question_line(&mut text, subject.display_label(), &spec.prompt_label);
        if let Some(snippet) = context.filter(|_| variant == PromptVariant::WithContext) {
            context_line(&mut text, &snippet.snippet);
        }
        text.push_str("A:");
        text
    };
    Ok(Prompt {
        token_estimate: estimator.estimate(&text),
        text,
        variant,
        subject: subject.clone(),
        relation: spec.id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RelationConfig;

    fn spec(name: &str) -> RelationSpec {
        RelationConfig::bundled().get(name).unwrap().clone()
    }

    #[test]
    fn standard_native_language() {
        let p = build_prompt(
            &spec("nativeLanguage"),
            &EntityRef::new("Q1", "Visvanath Kar"),
            PromptVariant::Standard,
            None,
        )
        .unwrap();
        assert!(p.text.starts_with("Q: Bill Byrge # native language\nA: English\n"));
        assert!(p.text.ends_with("Q: Visvanath Kar # native language\nA:"));
        assert_eq!(p.text.lines().last(), Some("A:"));
    }

    #[test]
    fn dont_know_alternates() {
        let p = build_prompt(
            &spec("producedBy"),
            &EntityRef::new("Q1", "Eikeviken"),
            PromptVariant::DontKnow,
            None,
        )
        .unwrap();
        assert!(p.text.contains("Q: Philips VG-8235 # manufacturer\nA: Don't know\n"));
        let answers: Vec<bool> = p
            .text
            .lines()
            .filter_map(|l| l.strip_prefix("A: "))
            .map(|a| a == DONT_KNOW)
            .collect();
        assert_eq!(answers, [false, true, false, true, false, true, false, true]);
    }

    #[test]
    fn dont_know_odd_k_leads_with_flagged() {
        let mut s = spec("spokenLanguage");
        s.few_shot_count = 5;
        let p = build_prompt(&s, &EntityRef::new("Q1", "x"), PromptVariant::DontKnow, None).unwrap();
        let flags: Vec<bool> = p
            .text
            .lines()
            .filter_map(|l| l.strip_prefix("A: "))
            .map(|a| a == DONT_KNOW)
            .collect();
        assert_eq!(flags, [true, false, true, false, true]);
    }

    #[test]
    fn dont_know_requires_flagged_examples() {
        let err = build_prompt(
            &spec("nativeLanguage"),
            &EntityRef::new("Q1", "x"),
            PromptVariant::DontKnow,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, PromptError::Precondition(_)));
    }

    #[test]
    fn standard_needs_enough_answered_examples() {
        let err = build_prompt(
            &spec("producedBy"),
            &EntityRef::new("Q1", "x"),
            PromptVariant::Standard,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, PromptError::Config(_)));
    }

    #[test]
    fn context_variant_needs_snippet() {
        let s = spec("inContinent");
        let subject = EntityRef::new("Q1", "Hillary Canyon");
        let err = build_prompt(&s, &subject, PromptVariant::WithContext, None).unwrap_err();
        assert!(matches!(err, PromptError::Precondition(_)));
        let snippet = SearchSnippet::new("Hillary Canyon continent", "An undersea canyon.", "https://example.org");
        let p = build_prompt(&s, &subject, PromptVariant::WithContext, Some(&snippet)).unwrap();
        assert!(p
            .text
            .ends_with("Q: Hillary Canyon # continent\nC: An undersea canyon.\nA:"));
    }

    #[test]
    fn chat_prompt_uses_template() {
        let p = build_prompt(
            &spec("developedBy"),
            &EntityRef::new("Q1", "The Incredible Hulk"),
            PromptVariant::Chat,
            None,
        )
        .unwrap();
        assert_eq!(
            p.text,
            "Who are the developers of The Incredible Hulk? Give me a list with no additional text."
        );
    }

    #[test]
    fn k_controls_block_count() {
        let mut s = spec("developedBy");
        for k in 1..=8 {
            s.few_shot_count = k;
            let p = build_prompt(&s, &EntityRef::new("Q1", "x"), PromptVariant::Standard, None).unwrap();
            assert_eq!(p.text.lines().filter(|l| l.starts_with("Q: ")).count(), k + 1);
        }
    }
}
