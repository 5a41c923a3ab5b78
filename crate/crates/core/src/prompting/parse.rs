use crate::model::{normalize_label, Answer, PromptVariant};

use super::builder::ANSWER_SEPARATOR;

fn is_dont_know(normalized: &str) -> bool {
    let stripped: String = normalized
        .chars()
        .filter(|c| !matches!(c, '\'' | '’' | '‘' | '`' | 'ʼ'))
        .collect();
    stripped == "dont know"
}

/// Parses a raw generation into object labels or an abstention.
///
/// Only the first line counts. Pieces are split on `" # "` and `","`,
/// normalized, and empty pieces dropped. An empty line or a "Don't know"
/// (any apostrophe) is an abstention.
pub fn parse_answer(raw: &str, _variant: PromptVariant) -> Answer {
    let line = raw.split('\n').next().unwrap_or_default().trim();
    let whole = normalize_label(line);
    if whole.is_empty() || is_dont_know(&whole) {
        return Answer::Abstain;
    }
    let labels: Vec<String> = line
        .split(ANSWER_SEPARATOR)
        .flat_map(|piece| piece.split(','))
        .map(normalize_label)
        .filter(|l| !l.is_empty())
        .collect();
    if labels.is_empty() {
        return Answer::Objects(vec![whole]);
    }
    Answer::Objects(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::format_answer;
    use proptest::prelude::*;

    fn parse(s: &str) -> Answer {
        parse_answer(s, PromptVariant::Standard)
    }

    #[test]
    fn appendix_answers() {
        assert_eq!(parse("Swedish"), Answer::Objects(vec!["swedish".into()]));
        assert_eq!(parse("Don't know"), Answer::Abstain);
        assert_eq!(parse("Don’t know."), Answer::Abstain);
        assert_eq!(
            parse("Whirlpool, Sekai Project"),
            Answer::Objects(vec!["whirlpool".into(), "sekai project".into()])
        );
        assert_eq!(
            parse(" Treyarch # Exakt Entertainment\nQ: next # developer"),
            Answer::Objects(vec!["treyarch".into(), "exakt entertainment".into()])
        );
    }

    #[test]
    fn empty_and_garbage() {
        assert_eq!(parse(""), Answer::Abstain);
        assert_eq!(parse("\nSwedish"), Answer::Abstain);
        assert_eq!(parse(" , ,"), Answer::Objects(vec![", ,".into()]));
    }

    fn label() -> impl Strategy<Value = String> {
        "[A-Za-zÀ-ÿ][A-Za-zÀ-ÿ0-9 .'-]{0,20}"
            .prop_filter("not a don't-know", |s| {
                let n = normalize_label(s);
                !n.is_empty() && !is_dont_know(&n)
            })
    }

    proptest! {
        #[test]
        fn never_yields_empty_labels(s in "\\PC{0,40}") {
            match parse(&s) {
                Answer::Abstain => {}
                Answer::Objects(ls) => {
                    prop_assert!(!ls.is_empty());
                    prop_assert!(ls.iter().all(|l| !l.is_empty()));
                }
            }
        }

        #[test]
        fn rendered_answer_round_trips(labels in prop::collection::vec(label(), 1..5)) {
            let line = format_answer(&labels);
            let expected: Vec<String> = labels.iter().map(|l| normalize_label(l)).collect();
            prop_assert_eq!(parse(&line), Answer::Objects(expected));
        }
    }
}
