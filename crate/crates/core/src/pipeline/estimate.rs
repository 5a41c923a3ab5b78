use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ingest::GapReport;

/// Rounds half away from zero for non-negative inputs.
pub fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

/// Statements addable at the measured high-confidence rate.
pub fn addable_statements(fraction: f64, missing_subjects: u64) -> u64 {
    round_half_up(fraction * missing_subjects as f64).min(missing_subjects)
}

/// Growth of a relation in whole percent: `100 · A · a / N_cur`.
pub fn relative_growth(addable: u64, manual_accuracy: f64, current_statements: u64) -> Result<u64, PipelineError> {
    if current_statements == 0 {
        return Err(PipelineError::UndefinedGrowth);
    }
    Ok(round_half_up(100.0 * addable as f64 * manual_accuracy / current_statements as f64))
}

/// Per-relation completion yield and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionEstimate {
    pub relation: String,
    pub current_statements: u64,
    pub missing_subjects: u64,
    pub queried: u64,
    pub retained: u64,
    pub high_confidence_fraction: f64,
    pub addable: u64,
    pub manual_accuracy: Option<f64>,
    /// Whole percent; `None` without a manual accuracy or current statements.
    pub relative_growth_pct: Option<u64>,
    pub query_cost: f64,
    /// `None` when nothing was retained.
    pub cost_per_retained: Option<f64>,
}

impl CompletionEstimate {
    pub fn new(
        relation: impl Into<String>,
        current_statements: u64,
        missing_subjects: u64,
        queried: u64,
        retained: u64,
        manual_accuracy: Option<f64>,
        query_cost: f64,
    ) -> Self {
        let fraction = if queried == 0 { 0.0 } else { retained as f64 / queried as f64 };
        let addable = addable_statements(fraction, missing_subjects);
        Self {
            relation: relation.into(),
            current_statements,
            missing_subjects,
            queried,
            retained,
            high_confidence_fraction: fraction,
            addable,
            manual_accuracy,
            relative_growth_pct: manual_accuracy
                .and_then(|a| relative_growth(addable, a, current_statements).ok()),
            query_cost,
            cost_per_retained: (retained > 0).then(|| query_cost / retained as f64),
        }
    }
}

/// Reads gap counts from a tab-separated file with a header row naming at
/// least `relation`, `current_statements` and `missing_subjects`. Other
/// columns are ignored.
pub fn load_gap_reports(path: impl AsRef<Path>) -> Result<Vec<GapReport>, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_gap_reports(&text)
}

pub fn parse_gap_reports(text: &str) -> Result<Vec<GapReport>, PipelineError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| PipelineError::Config(format!("gap report header lacks `{name}`")))
    };
    let (ri, ci, mi) = (find("relation")?, find("current_statements")?, find("missing_subjects")?);
    let mut out = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        let cell = |idx: usize| {
            cells.get(idx).copied().ok_or_else(|| {
                PipelineError::Config(format!("gap report line {}: missing column {}", i + 1, idx + 1))
            })
        };
        let num = |idx: usize| -> Result<u64, PipelineError> {
            let raw = cell(idx)?;
            raw.replace(',', "").parse().map_err(|_| {
                PipelineError::Config(format!("gap report line {}: `{raw}` is not a count", i + 1))
            })
        };
        out.push(GapReport {
            relation: cell(ri)?.to_string(),
            current_statements: num(ci)?,
            missing_subjects: num(mi)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_examples() {
        assert_eq!(relative_growth(551_263, 0.88, 71_101).unwrap(), 682);
        assert_eq!(relative_growth(0, 0.5, 100).unwrap(), 0);
        // 3,856,831 · 0.82 / 264,778 = 11.944
        assert_eq!(relative_growth(3_856_831, 0.82, 264_778).unwrap(), 1194);
        assert!(matches!(relative_growth(1, 1.0, 0), Err(PipelineError::UndefinedGrowth)));
    }

    #[test]
    fn addable_rounds_half_up() {
        assert_eq!(addable_statements(0.62, 889_134), 551_263);
        assert_eq!(addable_statements(0.5, 5), 3);
        assert_eq!(addable_statements(1.0, 7), 7);
    }

    #[test]
    fn estimate_with_no_queries() {
        let e = CompletionEstimate::new("P1", 10, 0, 0, 0, Some(0.9), 0.0);
        assert_eq!(e.high_confidence_fraction, 0.0);
        assert_eq!(e.addable, 0);
        assert_eq!(e.relative_growth_pct, Some(0));
        assert_eq!(e.cost_per_retained, None);
    }

    #[test]
    fn estimate_fixture() {
        let e = CompletionEstimate::new("P1", 100, 10, 10, 6, None, 1.0);
        assert_eq!(e.high_confidence_fraction, 0.6);
        assert_eq!(e.addable, 6);
    }

    #[test]
    fn gap_report_parsing() {
        let text = "relation\tcurrent_statements\tmissing_subjects\textra\nP1\t1,000\t20\tx\n\nP2\t5\t0\ty\n";
        let r = parse_gap_reports(text).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].current_statements, 1000);
        assert!(parse_gap_reports("relation\tmissing_subjects\n").is_err());
        assert!(parse_gap_reports("relation\tcurrent_statements\tmissing_subjects\nP1\tx\t1\n").is_err());
    }
}
