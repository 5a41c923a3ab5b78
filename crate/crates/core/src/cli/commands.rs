use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{CliError, ExitStatus, RunConfig};
use crate::gateway::Gateway;
use crate::ingest::{gap_report, GapReport, GoldDataset, SparqlEndpoint};
use crate::model::{EntityRef, PromptVariant, RelationSpec, ScoredPrediction};
use crate::pipeline::{
    calibrate_on_gold, emit_quickstatements, estimate_cost, load_gap_reports, predict_subjects,
    render_sweep_table, run_completion, sweep_variants, BudgetTracker, CompletionOptions, CompletionRun,
    CostEstimate, ManifestEntry, RunManifest, MAX_FEW_SHOT,
};
use crate::scoring::{
    render_metrics_table, render_threshold_table, retain_all_metrics, write_json_report, Calibration,
    ThresholdReport,
};

/// Target precisions reported by evaluation and sweeps.
pub const REPORT_TARGETS: [f64; 2] = [0.95, 0.90];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_report<T: Serialize>(config: &RunConfig, name: &str, value: &T) -> Result<(), CliError> {
    let path = config.output_dir.join(name);
    write_json_report(&path, value).map_err(io_err(&path))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, item).map_err(|e| CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<(), CliError> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| CliError::Runtime(format!("stdout: {e}")))
}

struct Setup {
    specs: Vec<RelationSpec>,
    gateway: Gateway,
    options: CompletionOptions,
    budget: BudgetTracker,
}

fn setup(config: &RunConfig) -> Result<Setup, CliError> {
    config.validate()?;
    let relations = config.relation_config()?;
    let specs = config.selected_specs(&relations)?;
    Ok(Setup {
        specs,
        gateway: config.gateway()?,
        options: config.completion_options()?,
        budget: BudgetTracker::new(config.budget),
    })
}

fn gold_subjects(gold: &GoldDataset, spec: &RelationSpec) -> Result<Vec<EntityRef>, CliError> {
    let subjects: Vec<EntityRef> = gold.facts(&spec.id).iter().map(|f| f.subject.clone()).collect();
    if subjects.is_empty() {
        return Err(CliError::Config(format!("no gold facts for relation {} ({})", spec.name, spec.id)));
    }
    Ok(subjects)
}

fn status(budget_stopped: bool, failures: usize) -> ExitStatus {
    if budget_stopped {
        ExitStatus::BudgetStop
    } else if failures > 0 {
        ExitStatus::PartialFailure
    } else {
        ExitStatus::Success
    }
}

/// Retain-all evaluation on gold subjects, plus coverage at the report
/// targets when the provider scores its answers.
pub async fn cmd_evaluate(config: &RunConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let gold = config.gold_dataset()?;
    let s = setup(config)?;
    let mut predictions: Vec<ScoredPrediction> = Vec::new();
    let mut failures = 0;
    let mut budget_stopped = false;
    for spec in &s.specs {
        let subjects = gold_subjects(&gold, spec)?;
        let outcome = predict_subjects(spec, &subjects, config.variant, &s.gateway, &s.options, &s.budget).await?;
        failures += outcome.failures.len();
        budget_stopped |= outcome.budget_stopped;
        for f in &outcome.failures {
            tracing::warn!(relation = %spec.id, subject = %f.subject, "{}", f.message);
        }
        predictions.extend(outcome.predictions);
    }
    if predictions.is_empty() {
        return Err(CliError::Runtime("no predictions to evaluate".into()));
    }
    let names = |id: &str| {
        s.specs
            .iter()
            .find(|sp| sp.id == id)
            .map(|sp| sp.name.clone())
            .unwrap_or_else(|| id.to_string())
    };

    let metrics = retain_all_metrics(&predictions, &gold).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_report(config, "metrics.json", &metrics)?;
    write_jsonl(&config.output_dir.join("evaluation.predictions.jsonl"), &predictions)?;
    let mut shown = metrics.clone();
    for r in &mut shown.relations {
        r.relation = names(&r.relation);
    }
    say(out, render_metrics_table(&shown))?;

    if s.gateway.supports_logprobs() && config.variant.is_completion_style() {
        let thresholds = ThresholdReport::from_predictions(&predictions, &gold, &REPORT_TARGETS)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        write_report(config, "thresholds.json", &thresholds)?;
        let mut shown = thresholds.clone();
        for r in &mut shown.rows {
            r.relation = names(&r.relation);
        }
        say(out, "\n")?;
        say(out, render_threshold_table(&shown))?;
    }
    Ok(status(budget_stopped, failures))
}

/// Calibrates each selected relation and writes the thresholds back into
/// the relation config (or `relations.toml` in the output directory when
/// running on the bundled relations).
pub async fn cmd_calibrate(config: &RunConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let gold = config.gold_dataset()?;
    let s = setup(config)?;
    let mut relations = config.relation_config()?;
    let mut report: Vec<Calibration> = Vec::new();
    let mut flagged: Vec<String> = Vec::new();
    let mut failed = 0;
    let mut budget_stopped = false;
    for spec in &s.specs {
        gold_subjects(&gold, spec)?;
        let mut fresh = spec.clone();
        fresh.threshold = None;
        let (calibration, outcome) = calibrate_on_gold(&fresh, &gold, &s.gateway, &s.options, &s.budget).await?;
        budget_stopped |= outcome.budget_stopped;
        match calibration {
            Ok(c) => {
                relations
                    .get_mut(&spec.id)
                    .map_err(|e| CliError::Config(e.to_string()))?
                    .threshold = Some(c.threshold);
                if c.low_confidence {
                    flagged.push(spec.name.clone());
                }
                say(
                    out,
                    format!(
                        "{:<20} tau={:<16} coverage={:.3} precision={}{}\n",
                        spec.name,
                        c.threshold.to_string(),
                        c.coverage,
                        c.precision.map(|p| format!("{p:.3}")).unwrap_or_else(|| "-".into()),
                        if c.low_confidence { "  [low confidence]" } else { "" }
                    ),
                )?;
                report.push(c);
            }
            Err(reason) => {
                failed += 1;
                flagged.push(spec.name.clone());
                say(out, format!("{:<20} calibration failed: {reason}\n", spec.name))?;
            }
        }
    }
    let target = config
        .relations
        .clone()
        .unwrap_or_else(|| config.output_dir.join("relations.toml"));
    relations.save(&target).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_report(config, "calibration.json", &report)?;
    if !flagged.is_empty() {
        say(out, format!("flagged: {}\n", flagged.join(", ")))?;
    }
    say(out, format!("thresholds written to {}\n", target.display()))?;
    Ok(status(budget_stopped, failed))
}

#[derive(Serialize)]
struct CompletionReport<'a> {
    relation: &'a str,
    estimate: &'a crate::pipeline::CompletionEstimate,
    calibration: Option<&'a Calibration>,
    failures: &'a [crate::pipeline::SubjectFailure],
}

/// Runs completion over every selected relation and writes the statement
/// exports, retained predictions, per-relation reports and the manifest.
pub async fn cmd_complete(config: &RunConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let s = setup(config)?;
    if let Some(spec) = s.specs.iter().find(|sp| sp.threshold.is_none()) {
        return Err(CliError::Config(format!(
            "relation {} has no calibrated threshold; run calibrate first",
            spec.name
        )));
    }
    // Gold is only needed for object linking here.
    let gold = match &config.gold {
        Some(_) => config.gold_dataset()?,
        None => GoldDataset::new("none"),
    };
    let endpoint = config.endpoint()?;
    let run_one = |spec: &RelationSpec| {
        let mut options = s.options.clone();
        options.manual_accuracy = config.manual_accuracy_for(spec);
        let spec = spec.clone();
        let gold = &gold;
        let endpoint: &dyn SparqlEndpoint = endpoint.as_ref();
        let gateway = &s.gateway;
        let budget = &s.budget;
        async move {
            let run = run_completion(&spec, gold, endpoint, gateway, &options, budget).await;
            (spec, run)
        }
    };
    // Shared budgets are booked in relation order so runs stay reproducible.
    let results: Vec<(RelationSpec, Result<CompletionRun, crate::pipeline::PipelineError>)> =
        if config.budget.is_unlimited() {
            futures::future::join_all(s.specs.iter().map(run_one)).await
        } else {
            let mut v = Vec::new();
            for spec in &s.specs {
                v.push(run_one(spec).await);
            }
            v
        };

    let mut entries = Vec::new();
    let mut reports = Vec::new();
    let mut failed_relations = 0;
    let mut subject_failures = 0;
    let mut runs = Vec::new();
    for (spec, run) in results {
        match run {
            Ok(run) => runs.push((spec, run)),
            Err(e) => {
                failed_relations += 1;
                say(out, format!("{:<20} failed: {e}\n", spec.name))?;
            }
        }
    }
    for (spec, run) in &runs {
        let export_path = config.output_dir.join(format!("{}.tsv", spec.id));
        let counts = emit_quickstatements(&run.statements, &export_path).map_err(io_err(&export_path))?;
        write_jsonl(&config.output_dir.join(format!("{}.retained.jsonl", spec.id)), &run.retained)?;
        subject_failures += run.failures.len();
        say(
            out,
            format!(
                "{:<20} tau={:<16} queried={:<6} retained={:<6} written={:<6} needs-linking={:<4}{}\n",
                spec.name,
                run.threshold.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
                run.estimate.queried,
                run.estimate.retained,
                counts.written,
                counts.needs_linking,
                run.skipped.as_deref().map(|r| format!("  [skipped: {r}]")).unwrap_or_default()
            ),
        )?;
        entries.push(ManifestEntry::new(spec, run, counts));
        reports.push(CompletionReport {
            relation: &spec.id,
            estimate: &run.estimate,
            calibration: run.calibration.as_ref(),
            failures: &run.failures,
        });
    }
    write_report(config, "completion.json", &reports)?;
    let manifest = RunManifest::new(s.gateway.provider_id(), config.variant.as_str(), entries);
    write_report(config, "manifest.json", &manifest)?;
    say(
        out,
        format!(
            "total: queried={} retained={} written={} cost={:.4}\n",
            manifest.totals.queried, manifest.totals.retained, manifest.totals.statements_written, manifest.totals.cost
        ),
    )?;
    if manifest.budget_exhausted {
        say(out, "warning: budget exhausted; outputs are partial\n")?;
    }
    Ok(status(manifest.budget_exhausted, failed_relations + subject_failures))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub relation: String,
    pub current_statements: u64,
    pub missing_subjects: u64,
    pub cost: CostEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
    pub total_queries: u64,
    pub total_cost: f64,
}

/// Prices one query per missing subject, from a gap-report file or live
/// counts from the configured knowledge base.
pub async fn cmd_estimate(config: &RunConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    config.validate()?;
    let model = config.cost_model();
    let gaps: Vec<GapReport> = match &config.gap_reports {
        Some(path) => {
            let all = load_gap_reports(path).map_err(|e| CliError::Config(e.to_string()))?;
            if config.only.is_empty() {
                all
            } else {
                all.into_iter().filter(|g| config.only.contains(&g.relation)).collect()
            }
        }
        None => {
            let relations = config.relation_config()?;
            let specs = config.selected_specs(&relations)?;
            let endpoint = config.endpoint()?;
            let mut v = Vec::new();
            for spec in &specs {
                v.push(gap_report(spec, endpoint.as_ref()).await.map_err(|e| CliError::Runtime(e.to_string()))?);
            }
            v
        }
    };
    let rows: Vec<EstimateRow> = gaps
        .into_iter()
        .map(|g| EstimateRow {
            cost: estimate_cost(g.missing_subjects, &model),
            relation: g.relation,
            current_statements: g.current_statements,
            missing_subjects: g.missing_subjects,
        })
        .collect();
    let report = EstimateReport {
        total_queries: rows.iter().map(|r| r.missing_subjects).sum(),
        total_cost: rows.iter().map(|r| r.cost.total).sum(),
        rows,
    };
    let w = report.rows.iter().map(|r| r.relation.len()).max().unwrap_or(0).max("Relation".len());
    say(out, format!("{:<w$}  {:>12}  {:>14}\n", "Relation", "queries", "cost"))?;
    for r in &report.rows {
        say(out, format!("{:<w$}  {:>12}  {:>14.2}\n", r.relation, r.missing_subjects, r.cost.total))?;
    }
    let per = estimate_cost(1, &model);
    say(out, format!("{:<w$}  {:>12}  {:>14.2}\n", "Total", report.total_queries, report.total_cost))?;
    say(
        out,
        format!(
            "per query: {:.3} ct, per retained statement: {:.3} ct (retention {})\n",
            per.per_query * 100.0,
            per.per_retained * 100.0,
            model.retention_rate
        ),
    )?;
    write_report(config, "estimate.json", &report)?;
    Ok(ExitStatus::Success)
}

/// Compares prompt variants and few-shot counts on gold subjects.
pub async fn cmd_sweep(
    config: &RunConfig,
    k_values: &[usize],
    variants: &[PromptVariant],
    out: &mut dyn Write,
) -> Result<ExitStatus, CliError> {
    if k_values.iter().any(|k| !(1..=MAX_FEW_SHOT).contains(k)) {
        return Err(CliError::Config(format!("few-shot counts must lie in 1..={MAX_FEW_SHOT}")));
    }
    let gold = config.gold_dataset()?;
    let s = setup(config)?;
    let mut reports = Vec::new();
    let mut failures = 0;
    for spec in &s.specs {
        gold_subjects(&gold, spec)?;
        let r = sweep_variants(spec, &gold, &s.gateway, k_values, variants, &REPORT_TARGETS, &s.options).await?;
        failures += r.cells.iter().filter(|c| c.error.is_some()).count();
        reports.push(r);
    }
    write_report(config, "sweep.json", &reports)?;
    let names = |id: &str| {
        s.specs
            .iter()
            .find(|sp| sp.id == id)
            .map(|sp| sp.name.clone())
            .unwrap_or_else(|| id.to_string())
    };
    say(out, render_sweep_table(&reports, &names))?;
    Ok(status(false, failures))
}

