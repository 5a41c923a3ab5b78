use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::budget::BudgetTracker;
use super::estimate::CompletionEstimate;
use super::export::predictions_to_statements;
use super::PipelineError;
use crate::gateway::{batch_generate, Gateway, GenerationRequest};
use crate::ingest::{find_all_missing_subjects, gap_report, GoldDataset, SparqlEndpoint};
use crate::model::{Answer, EntityRef, Fact, PromptVariant, RelationSpec, ScoredPrediction, Threshold};
use crate::prompting::{build_prompt, fetch_context, parse_answer, PromptError, SearchProvider};
use crate::scoring::{calibrate_threshold, filter_by_threshold, Calibration, DEFAULT_PRECISION_RANGE};

#[derive(Clone)]
pub struct CompletionOptions {
    pub variant: PromptVariant,
    pub precision_range: (f64, f64),
    pub max_in_flight: usize,
    pub page_size: usize,
    /// Cap on missing subjects queried, in identifier order.
    pub max_subjects: Option<usize>,
    /// Export every predicted object instead of only the first.
    pub all_objects: bool,
    pub manual_accuracy: Option<f64>,
    /// Required for context-augmented prompts.
    pub search: Option<Arc<dyn SearchProvider>>,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            variant: PromptVariant::Standard,
            precision_range: DEFAULT_PRECISION_RANGE,
            max_in_flight: 8,
            page_size: 10_000,
            max_subjects: None,
            all_objects: false,
            manual_accuracy: None,
            search: None,
        }
    }
}

/// A subject that produced no prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectFailure {
    pub subject: String,
    pub message: String,
}

/// Predictions for a list of subjects plus request accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictOutcome {
    pub predictions: Vec<ScoredPrediction>,
    pub failures: Vec<SubjectFailure>,
    pub requests: usize,
    pub replayed: usize,
    pub cost: f64,
    pub budget_stopped: bool,
}

impl PredictOutcome {
    fn absorb(&mut self, other: PredictOutcome) {
        self.failures.extend(other.failures);
        self.requests += other.requests;
        self.replayed += other.replayed;
        self.cost += other.cost;
        self.budget_stopped |= other.budget_stopped;
    }
}

/// Builds prompts for `subjects`, books each against the budget in order
/// and runs the admitted ones through the gateway. Per-subject problems are
/// recorded as failures; a prompt configuration error aborts.
pub async fn predict_subjects(
    spec: &RelationSpec,
    subjects: &[EntityRef],
    variant: PromptVariant,
    gateway: &Gateway,
    options: &CompletionOptions,
    budget: &BudgetTracker,
) -> Result<PredictOutcome, PipelineError> {
    let mut outcome = PredictOutcome::default();
    let contexts = if variant == PromptVariant::WithContext {
        let search = options.search.as_ref().ok_or_else(|| {
            PipelineError::Config("context prompting needs a search provider".into())
        })?;
        stream::iter(subjects)
            .map(|s| fetch_context(s, spec, search.as_ref()))
            .buffered(options.max_in_flight.max(1))
            .collect::<Vec<_>>()
            .await
    } else {
        Vec::new()
    };

    let mut requests = Vec::new();
    for (i, subject) in subjects.iter().enumerate() {
        let context = match contexts.get(i) {
            None => None,
            Some(Ok(Some(snippet))) => Some(snippet),
            Some(Ok(None)) => None,
            Some(Err(e)) => {
                outcome.failures.push(SubjectFailure {
                    subject: subject.id.clone(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let prompt = match build_prompt(spec, subject, variant, context) {
            Ok(p) => p,
            Err(PromptError::Precondition(msg)) => {
                outcome.failures.push(SubjectFailure {
                    subject: subject.id.clone(),
                    message: msg,
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let cost = prompt.token_estimate as f64 * gateway.price_per_1k_tokens() / 1000.0;
        if !budget.try_reserve(cost) {
            outcome.budget_stopped = true;
            break;
        }
        outcome.cost += cost;
        requests.push(GenerationRequest::new(prompt));
    }
    outcome.requests = requests.len();

    let results = batch_generate(&requests, gateway, options.max_in_flight).await;
    for (request, result) in requests.iter().zip(results) {
        let subject = request.prompt.subject.clone();
        match result {
            Ok(generation) => {
                outcome.replayed += usize::from(generation.replayed);
                let answer = if generation.refused {
                    Answer::Abstain
                } else {
                    parse_answer(&generation.text, variant)
                };
                outcome.predictions.push(ScoredPrediction::new(
                    subject,
                    spec.id.clone(),
                    answer,
                    generation.confidence(),
                    generation.text.clone(),
                    variant,
                ));
            }
            Err(e) => outcome.failures.push(SubjectFailure {
                subject: subject.id,
                message: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

/// Everything one relation's completion run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRun {
    pub relation: String,
    pub variant: PromptVariant,
    /// Threshold used for filtering; `None` when the run was skipped before
    /// a threshold was known.
    pub threshold: Option<Threshold>,
    /// Present when the threshold was calibrated during this run.
    pub calibration: Option<Calibration>,
    /// Why generation over missing subjects did not happen.
    pub skipped: Option<String>,
    pub predictions: Vec<ScoredPrediction>,
    pub retained: Vec<ScoredPrediction>,
    pub statements: Vec<Fact>,
    pub failures: Vec<SubjectFailure>,
    pub estimate: CompletionEstimate,
    pub requests: usize,
    pub replayed: usize,
    pub cost: f64,
    pub budget_exhausted: bool,
}

/// Calibrates on the relation's gold subjects.
pub async fn calibrate_on_gold(
    spec: &RelationSpec,
    gold: &GoldDataset,
    gateway: &Gateway,
    options: &CompletionOptions,
    budget: &BudgetTracker,
) -> Result<(Result<Calibration, String>, PredictOutcome), PipelineError> {
    let subjects: Vec<EntityRef> = gold.facts(&spec.id).iter().map(|f| f.subject.clone()).collect();
    if subjects.is_empty() {
        return Ok((Err(format!("no gold facts for {}", spec.id)), PredictOutcome::default()));
    }
    let outcome = predict_subjects(spec, &subjects, options.variant, gateway, options, budget).await?;
    if outcome.budget_stopped {
        return Ok((Err("budget exhausted during calibration".into()), outcome));
    }
    let calibration = calibrate_threshold(spec, &outcome.predictions, gold, options.precision_range)
        .map_err(|e| e.to_string());
    Ok((calibration, outcome))
}

/// Calibrates if needed, queries every missing subject, filters by the
/// threshold and links the retained answers into statements.
///
/// Responses already in the gateway's transcript are replayed, so an
/// interrupted run can be repeated to completion without re-querying.
pub async fn run_completion(
    spec: &RelationSpec,
    gold: &GoldDataset,
    endpoint: &dyn SparqlEndpoint,
    gateway: &Gateway,
    options: &CompletionOptions,
    budget: &BudgetTracker,
) -> Result<CompletionRun, PipelineError> {
    let gap = gap_report(spec, endpoint).await?;
    let mut run = CompletionRun {
        relation: spec.id.clone(),
        variant: options.variant,
        threshold: spec.threshold,
        calibration: None,
        skipped: None,
        predictions: Vec::new(),
        retained: Vec::new(),
        statements: Vec::new(),
        failures: Vec::new(),
        estimate: CompletionEstimate::new(&spec.id, gap.current_statements, gap.missing_subjects, 0, 0, options.manual_accuracy, 0.0),
        requests: 0,
        replayed: 0,
        cost: 0.0,
        budget_exhausted: false,
    };
    let mut accounting = PredictOutcome::default();

    let threshold = match spec.threshold {
        Some(t) => t,
        None => {
            let (calibration, outcome) = calibrate_on_gold(spec, gold, gateway, options, budget).await?;
            accounting.absorb(outcome);
            match calibration {
                Ok(c) if !c.failed() => {
                    let t = c.threshold;
                    run.calibration = Some(c);
                    run.threshold = Some(t);
                    t
                }
                Ok(c) => {
                    run.skipped = Some("calibration retains nothing".into());
                    run.threshold = Some(c.threshold);
                    run.calibration = Some(c);
                    return Ok(finish(run, accounting));
                }
                Err(reason) => {
                    tracing::warn!(relation = %spec.id, "calibration failed: {reason}");
                    run.skipped = Some(format!("calibration failed: {reason}"));
                    return Ok(finish(run, accounting));
                }
            }
        }
    };
    if threshold == Threshold::RetainNothing {
        run.skipped = Some("threshold retains nothing".into());
        return Ok(finish(run, accounting));
    }

    let mut missing = find_all_missing_subjects(spec, endpoint, options.page_size, options.max_in_flight).await?;
    let n_missing = missing.len() as u64;
    if let Some(cap) = options.max_subjects {
        missing.truncate(cap);
    }
    let outcome = predict_subjects(spec, &missing, options.variant, gateway, options, budget).await?;
    run.predictions = outcome.predictions.clone();
    accounting.absorb(outcome);

    run.retained = filter_by_threshold(&run.predictions, threshold);
    run.statements = predictions_to_statements(&run.retained, &gold.object_label_index(), options.all_objects);
    run.estimate = CompletionEstimate::new(
        &spec.id,
        gap.current_statements,
        n_missing,
        run.predictions.len() as u64,
        run.retained.len() as u64,
        options.manual_accuracy,
        0.0,
    );
    Ok(finish(run, accounting))
}

fn finish(mut run: CompletionRun, accounting: PredictOutcome) -> CompletionRun {
    run.failures = accounting.failures;
    run.requests = accounting.requests;
    run.replayed = accounting.replayed;
    run.cost = accounting.cost;
    run.budget_exhausted = accounting.budget_stopped;
    run.estimate.query_cost = accounting.cost;
    run.estimate.cost_per_retained = (run.estimate.retained > 0).then(|| accounting.cost / run.estimate.retained as f64);
    run
}
