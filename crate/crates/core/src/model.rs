//! Shared domain types: entities, relation configuration, facts, scored
//! predictions and Likert ratings.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Canonical comparison form of a label.
///
/// Trims, collapses internal whitespace to single spaces, lowercases and
/// strips trailing periods. Diacritics and other characters are kept as-is.
///
/// ```
/// assert_eq!(kbc::normalize_label("  Swedish "), "swedish");
/// assert_eq!(kbc::normalize_label("L’Oréal."), "l’oréal");
/// ```
pub fn normalize_label(raw: &str) -> String {
    let mut out = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    // Repeat until stable so that "a. ." and "a.." normalize the same way on
    // every pass.
    while out.ends_with('.') {
        out.pop();
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
    }
    out
}

/// A knowledge-base entity: opaque identifier plus surface label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    /// Empty only for predicted objects that have not been linked to the KB.
    pub id: String,
    pub label: String,
}

impl EntityRef {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
        }
    }

    /// An object known only by its label.
    pub fn unlinked(label: impl Into<String>) -> Self {
        Self {
            id: String::new(),
            label: label.into(),
        }
    }

    pub fn is_linked(&self) -> bool {
        !self.id.is_empty()
    }

    /// Label to show in prompts; falls back to the identifier.
    pub fn display_label(&self) -> &str {
        if self.label.is_empty() {
            &self.id
        } else {
            &self.label
        }
    }
}

/// Prompt shapes supported by the prompt builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Standard,
    DontKnow,
    WithContext,
    Chat,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [
        PromptVariant::Standard,
        PromptVariant::DontKnow,
        PromptVariant::WithContext,
        PromptVariant::Chat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Standard => "standard",
            PromptVariant::DontKnow => "dont_know",
            PromptVariant::WithContext => "with_context",
            PromptVariant::Chat => "chat",
        }
    }

    /// Completion-style variants end in `A:` and carry few-shot blocks.
    pub fn is_completion_style(self) -> bool {
        !matches!(self, PromptVariant::Chat)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(PromptVariant::Standard),
            "dont_know" | "dont-know" => Ok(PromptVariant::DontKnow),
            "with_context" | "with-context" | "context" => Ok(PromptVariant::WithContext),
            "chat" => Ok(PromptVariant::Chat),
            other => Err(format!("unknown prompt variant `{other}`")),
        }
    }
}

/// One in-context example of a relation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub subject: String,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub dont_know: bool,
    /// Search snippet shown on the `C:` line in context-augmented prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl FewShotExample {
    pub fn answered(subject: impl Into<String>, objects: &[&str]) -> Self {
        Self {
            subject: subject.into(),
            objects: objects.iter().map(|s| s.to_string()).collect(),
            dont_know: false,
            context: None,
        }
    }

    pub fn dont_know(subject: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            objects: Vec::new(),
            dont_know: true,
            context: None,
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }
}

/// Confidence threshold on first-token probability.
///
/// `RetainNothing` is the sentinel produced when no cut point reaches the
/// requested precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Confidence(f64),
    RetainNothing,
}

impl Threshold {
    pub fn admits(self, confidence: f64) -> bool {
        match self {
            Threshold::Confidence(tau) => confidence >= tau,
            Threshold::RetainNothing => false,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Threshold::Confidence(tau) => tau,
            Threshold::RetainNothing => f64::INFINITY,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Confidence(tau) => write!(f, "{tau:.6}"),
            Threshold::RetainNothing => f.write_str("retain-nothing"),
        }
    }
}

fn default_few_shot_count() -> usize {
    8
}

fn default_target_precision() -> f64 {
    0.90
}

/// Per-relation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    /// KB property identifier, e.g. `P103`.
    pub id: String,
    /// Short relation name, e.g. `nativeLanguage`.
    pub name: String,
    /// Relation phrase used on prompt `Q:` lines, e.g. `native language`.
    pub prompt_label: String,
    /// KB class constraining candidate subjects, e.g. `Q5`.
    pub subject_type: String,
    #[serde(default = "default_few_shot_count")]
    pub few_shot_count: usize,
    #[serde(default = "default_target_precision")]
    pub target_precision: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    /// Question template for chat-style models; `{subject}` is substituted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chat_template: Option<String>,
    #[serde(default)]
    pub few_shot_examples: Vec<FewShotExample>,
}

impl RelationSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("relation id is empty".into());
        }
        if !(1..=12).contains(&self.few_shot_count) {
            return Err(format!(
                "{}: few_shot_count {} outside [1, 12]",
                self.name, self.few_shot_count
            ));
        }
        if self.few_shot_count > self.few_shot_examples.len() {
            return Err(format!(
                "{}: few_shot_count {} exceeds {} configured examples",
                self.name,
                self.few_shot_count,
                self.few_shot_examples.len()
            ));
        }
        if let Some(ex) = self
            .few_shot_examples
            .iter()
            .find(|ex| ex.dont_know && !ex.objects.is_empty())
        {
            return Err(format!(
                "{}: don't-know example `{}` lists objects",
                self.name, ex.subject
            ));
        }
        if !(self.target_precision > 0.0 && self.target_precision < 1.0) {
            return Err(format!(
                "{}: target_precision {} outside (0, 1)",
                self.name, self.target_precision
            ));
        }
        if let Some(Threshold::Confidence(tau)) = self.threshold {
            if !(0.0..=1.0).contains(&tau) {
                return Err(format!("{}: threshold {tau} outside [0, 1]", self.name));
            }
        }
        Ok(())
    }

    /// Stable content hash used in run manifests.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("relation spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A (subject, relation, objects) statement.
///
/// Objects are kept deduplicated by normalized label and sorted, so equality
/// does not depend on insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub subject: EntityRef,
    pub relation: String,
    objects: Vec<EntityRef>,
}

impl Fact {
    pub fn new(
        subject: EntityRef,
        relation: impl Into<String>,
        objects: impl IntoIterator<Item = EntityRef>,
    ) -> Self {
        let mut fact = Self {
            subject,
            relation: relation.into(),
            objects: Vec::new(),
        };
        for obj in objects {
            fact.insert_object(obj);
        }
        fact
    }

    pub fn objects(&self) -> &[EntityRef] {
        &self.objects
    }

    /// Adds an object unless one with the same normalized label exists.
    /// Returns whether the object was inserted.
    pub fn insert_object(&mut self, obj: EntityRef) -> bool {
        let key = normalize_label(&obj.label);
        if self
            .objects
            .iter()
            .any(|o| normalize_label(&o.label) == key)
        {
            return false;
        }
        let pos = self
            .objects
            .binary_search_by(|o| (normalize_label(&o.label), &o.id).cmp(&(key.clone(), &obj.id)))
            .unwrap_or_else(|p| p);
        self.objects.insert(pos, obj);
        true
    }

    pub fn normalized_objects(&self) -> BTreeSet<String> {
        self.objects
            .iter()
            .map(|o| normalize_label(&o.label))
            .collect()
    }
}

/// Parsed LM answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Objects(Vec<String>),
    Abstain,
}

impl Answer {
    pub fn is_abstain(&self) -> bool {
        matches!(self, Answer::Abstain)
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Answer::Objects(labels) => labels,
            Answer::Abstain => &[],
        }
    }
}

/// LM output for one subject, parsed and scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    pub subject: EntityRef,
    pub relation: String,
    pub answer: Answer,
    /// First-token probability. `None` for providers without log-probabilities.
    pub confidence: Option<f64>,
    pub raw_text: String,
    pub prompt_variant: PromptVariant,
}

impl ScoredPrediction {
    pub fn new(
        subject: EntityRef,
        relation: impl Into<String>,
        answer: Answer,
        confidence: Option<f64>,
        raw_text: impl Into<String>,
        prompt_variant: PromptVariant,
    ) -> Self {
        let relation = relation.into();
        let id = prediction_id(&relation, &subject.id, prompt_variant);
        Self {
            id,
            subject,
            relation,
            answer,
            confidence,
            raw_text: raw_text.into(),
            prompt_variant,
        }
    }

    /// Normalized predicted labels, deduplicated.
    pub fn predicted_set(&self) -> BTreeSet<String> {
        self.answer.labels().iter().map(|l| normalize_label(l)).collect()
    }
}

/// Deterministic prediction identifier.
pub fn prediction_id(relation: &str, subject_id: &str, variant: PromptVariant) -> String {
    let mut h = Sha256::new();
    h.update(relation.as_bytes());
    h.update([0]);
    h.update(subject_id.as_bytes());
    h.update([0]);
    h.update(variant.as_str().as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Five-point verification scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertValue {
    Correct,
    Likely,
    Unknown,
    Implausible,
    False,
}

impl LikertValue {
    pub const ALL: [LikertValue; 5] = [
        LikertValue::Correct,
        LikertValue::Likely,
        LikertValue::Unknown,
        LikertValue::Implausible,
        LikertValue::False,
    ];

    /// Correct and likely count as true predictions.
    pub fn counts_as_true(self) -> bool {
        matches!(self, LikertValue::Correct | LikertValue::Likely)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertRating {
    pub prediction_id: String,
    pub value: LikertValue,
    pub annotator: String,
    pub timestamp: DateTime<Utc>,
}
