use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::IngestError;
use crate::model::{normalize_label, EntityRef, Fact};

/// Separator between multiple object ids or labels in one TSV cell.
pub const OBJECT_SEPARATOR: &str = " # ";

/// Gold facts grouped by relation id.
///
/// Within a relation there is at most one [`Fact`] per subject; further rows
/// for the same subject merge into its object set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldDataset {
    pub provenance: String,
    relations: BTreeMap<String, Vec<Fact>>,
    index: HashMap<(String, String), usize>,
}

impl GoldDataset {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            ..Default::default()
        }
    }

    /// Inserts a fact, merging objects with an existing fact for the same
    /// (subject, relation).
    pub fn insert(&mut self, fact: Fact) {
        let key = (fact.relation.clone(), fact.subject.id.clone());
        match self.index.get(&key) {
            Some(&pos) => {
                let existing = &mut self.relations.get_mut(&fact.relation).expect("indexed")[pos];
                for obj in fact.objects().iter().cloned() {
                    existing.insert_object(obj);
                }
            }
            None => {
                let facts = self.relations.entry(fact.relation.clone()).or_default();
                self.index.insert(key, facts.len());
                facts.push(fact);
            }
        }
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn facts(&self, relation: &str) -> &[Fact] {
        self.relations.get(relation).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, relation: &str, subject_id: &str) -> Option<&Fact> {
        self.index
            .get(&(relation.to_string(), subject_id.to_string()))
            .map(|&pos| &self.relations[relation][pos])
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn fact_count(&self) -> usize {
        self.relations.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Normalized object label → KB id, over every relation. The first id seen
    /// for a label wins. Used for exact-label linking of predicted objects.
    pub fn object_label_index(&self) -> HashMap<String, String> {
        let mut index = HashMap::new();
        for facts in self.relations.values() {
            for fact in facts {
                for obj in fact.objects().iter().filter(|o| o.is_linked()) {
                    index
                        .entry(normalize_label(&obj.label))
                        .or_insert_with(|| obj.id.clone());
                }
            }
        }
        index
    }

    /// Parses the gold TSV format.
    ///
    /// Columns: subject id, subject label, relation id, object ids, object
    /// labels. Multiple objects are separated by `" # "` in both object
    /// columns, which must then list the same number of entries.
    pub fn parse_tsv(text: &str, provenance: impl Into<String>) -> Result<Self, IngestError> {
        let mut ds = GoldDataset::new(provenance);
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    column: cols.len().min(5) + 1,
                    message: format!("expected 5 tab-separated columns, found {}", cols.len()),
                });
            }
            let required = [(0, "subject id"), (2, "relation id"), (3, "object ids")];
            for (col, what) in required {
                if cols[col].trim().is_empty() {
                    return Err(IngestError::MalformedRow {
                        line: line_no,
                        column: col + 1,
                        message: format!("empty {what}"),
                    });
                }
            }
            let ids: Vec<&str> = cols[3].split(OBJECT_SEPARATOR).map(str::trim).collect();
            let labels: Vec<&str> = cols[4].split(OBJECT_SEPARATOR).map(str::trim).collect();
            if ids.len() != labels.len() {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    column: 5,
                    message: format!(
                        "{} object ids but {} object labels",
                        ids.len(),
                        labels.len()
                    ),
                });
            }
            if let Some(pos) = ids.iter().position(|id| id.is_empty()) {
                return Err(IngestError::MalformedRow {
                    line: line_no,
                    column: 4,
                    message: format!("empty object id at position {}", pos + 1),
                });
            }
            let subject_label = if cols[1].trim().is_empty() {
                cols[0].trim()
            } else {
                cols[1].trim()
            };
            let objects = ids.iter().zip(&labels).map(|(id, label)| {
                let label = if label.is_empty() { *id } else { *label };
                EntityRef::new(*id, label)
            });
            ds.insert(Fact::new(
                EntityRef::new(cols[0].trim(), subject_label),
                cols[2].trim(),
                objects,
            ));
        }
        Ok(ds)
    }
}

/// Loads a gold dataset from a TSV file. An empty file yields an empty
/// dataset.
pub fn load_gold_dataset(path: impl AsRef<Path>) -> Result<GoldDataset, IngestError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| IngestError::MalformedRow {
        line: 0,
        column: 0,
        message: format!("file is not UTF-8: {e}"),
    })?;
    GoldDataset::parse_tsv(&text, path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let ds = GoldDataset::parse_tsv("Q1\tAs It Is in Heaven\tP364\tQ9027\tSwedish\n", "t").unwrap();
        let fact = ds.get("P364", "Q1").unwrap();
        assert_eq!(fact.subject.label, "As It Is in Heaven");
        assert_eq!(fact.objects(), &[EntityRef::new("Q9027", "Swedish")]);
    }

    #[test]
    fn multi_object_row() {
        let ds = GoldDataset::parse_tsv(
            "Q2\tCall of Duty 3\tP178\tQ10 # Q11\tTreyarch # Exakt Entertainment\n",
            "t",
        )
        .unwrap();
        assert_eq!(ds.get("P178", "Q2").unwrap().objects().len(), 2);
    }

    #[test]
    fn rows_for_same_pair_merge() {
        let text = "Q2\tx\tP178\tQ10\tTreyarch\nQ2\tx\tP178\tQ11\tExakt Entertainment\nQ2\tx\tP178\tQ10\tTreyarch\n";
        let ds = GoldDataset::parse_tsv(text, "t").unwrap();
        assert_eq!(ds.fact_count(), 1);
        assert_eq!(ds.get("P178", "Q2").unwrap().objects().len(), 2);
    }

    #[test]
    fn empty_input() {
        let ds = GoldDataset::parse_tsv("", "t").unwrap();
        assert_eq!(ds.relation_count(), 0);
        assert_eq!(ds.fact_count(), 0);
    }

    #[test]
    fn malformed_rows_name_line_and_column() {
        let err = GoldDataset::parse_tsv("Q1\ta\tP1\tQ2\tb\nQ1\ta\tP1\n", "t").unwrap_err();
        match err {
            IngestError::MalformedRow { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = GoldDataset::parse_tsv("Q1\ta\tP1\tQ2 # Q3\tb\n", "t").unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 1, column: 5, .. }));
        let err = GoldDataset::parse_tsv("\ta\tP1\tQ2\tb\n", "t").unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 1, column: 1, .. }));
    }
}
