use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{normalize_label, EntityRef, Fact, ScoredPrediction};
use crate::util::write_atomic;

/// Line counts of one export.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportCounts {
    pub written: usize,
    pub needs_linking: usize,
}

/// Sidecar path for statements lacking identifiers: `P103.tsv` →
/// `P103.needs-linking.tsv`.
pub fn needs_linking_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.needs-linking.tsv"))
}

/// Orders `Q2` before `Q10`; anything else falls back to string order.
fn compare_ids(a: &str, b: &str) -> Ordering {
    fn split(id: &str) -> (&str, Option<u64>) {
        let digits = id.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        let prefix = &id[..id.len() - digits.len()];
        (prefix, digits.parse().ok())
    }
    match (split(a), split(b)) {
        ((pa, Some(na)), (pb, Some(nb))) => pa.cmp(pb).then(na.cmp(&nb)),
        _ => a.cmp(b),
    }
    .then_with(|| a.cmp(b))
}

#[derive(PartialEq, Eq)]
struct Line<'a>([&'a str; 3]);

impl Ord for Line<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_ids(self.0[0], other.0[0])
            .then_with(|| compare_ids(self.0[2], other.0[2]))
            .then_with(|| self.0[1].cmp(other.0[1]))
    }
}

impl PartialOrd for Line<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn field(entity: &EntityRef) -> &str {
    if entity.is_linked() {
        &entity.id
    } else {
        &entity.label
    }
}

fn render(lines: &BTreeSet<Line<'_>>) -> Vec<u8> {
    let mut out = Vec::new();
    for Line(cells) in lines {
        out.extend_from_slice(cells.join("\t").as_bytes());
        out.push(b'\n');
    }
    out
}

/// Writes one `subject\tproperty\tobject` line per statement, ordered by
/// subject id then object id. Statements whose subject or object has no
/// identifier go to the needs-linking sidecar, with labels in place of the
/// missing ids. Duplicate lines are written once. Returns line counts.
pub fn emit_quickstatements(statements: &[Fact], out: &Path) -> std::io::Result<ExportCounts> {
    let mut linked = BTreeSet::new();
    let mut unlinked = BTreeSet::new();
    for fact in statements {
        for obj in fact.objects() {
            let line = Line([field(&fact.subject), fact.relation.as_str(), field(obj)]);
            if fact.subject.is_linked() && obj.is_linked() {
                linked.insert(line);
            } else {
                unlinked.insert(line);
            }
        }
    }
    write_atomic(out, &render(&linked))?;
    write_atomic(&needs_linking_path(out), &render(&unlinked))?;
    Ok(ExportCounts {
        written: linked.len(),
        needs_linking: unlinked.len(),
    })
}

/// Turns retained predictions into statements, linking object labels to KB
/// identifiers by exact normalized label. Only the first predicted object is
/// used unless `all_objects` is set.
pub fn predictions_to_statements(
    predictions: &[ScoredPrediction],
    label_index: &HashMap<String, String>,
    all_objects: bool,
) -> Vec<Fact> {
    predictions
        .iter()
        .filter(|p| !p.answer.is_abstain())
        .map(|p| {
            let labels = p.answer.labels();
            let take = if all_objects { labels.len() } else { labels.len().min(1) };
            let objects = labels[..take].iter().map(|label| match label_index.get(&normalize_label(label)) {
                Some(id) => EntityRef::new(id.clone(), label.clone()),
                None => EntityRef::unlinked(label.clone()),
            });
            Fact::new(p.subject.clone(), p.relation.clone(), objects)
        })
        .collect()
}
