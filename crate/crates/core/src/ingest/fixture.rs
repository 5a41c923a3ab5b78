use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use async_trait::async_trait;
use regex::Regex;

use super::sparql::{SparqlEndpoint, SparqlResults, SparqlTerm, ENTITY_PREFIX, INSTANCE_OF};
use super::IngestError;

/// In-memory triple store answering the queries this crate issues.
///
/// It understands exactly the query shapes produced by
/// [`missing_subjects_query`](super::missing_subjects_query),
/// [`count_missing_query`](super::count_missing_query) and
/// [`count_statements_query`](super::count_statements_query); anything else
/// is rejected. Useful for desk-scale runs and tests.
#[derive(Debug, Clone, Default)]
pub struct FixtureKb {
    id: String,
    /// property → subject → objects
    triples: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    labels: HashMap<String, String>,
}

struct Patterns {
    missing: Regex,
    count_missing: Regex,
    count_statements: Regex,
    limit: Regex,
    offset: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        missing: Regex::new(
            r"SELECT \?item \?itemLabel WHERE \{\s*\?item wdt:(\S+) wd:(\S+) \.\s*FILTER NOT EXISTS \{ \?item wdt:(\S+) \?value \. \}",
        )
        .unwrap(),
        count_missing: Regex::new(
            r"SELECT \(COUNT\(DISTINCT \?item\) AS \?count\) WHERE \{\s*\?item wdt:(\S+) wd:(\S+) \.\s*FILTER NOT EXISTS \{ \?item wdt:(\S+) \?value \. \}",
        )
        .unwrap(),
        count_statements: Regex::new(
            r"SELECT \(COUNT\(\*\) AS \?count\) WHERE \{\s*\?s wdt:(\S+) \?o \.",
        )
        .unwrap(),
        limit: Regex::new(r"(?m)^LIMIT (\d+)$").unwrap(),
        offset: Regex::new(r"(?m)^OFFSET (\d+)$").unwrap(),
    })
}

impl FixtureKb {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, subject: &str, property: &str, object: &str) -> &mut Self {
        self.triples
            .entry(property.to_string())
            .or_default()
            .entry(subject.to_string())
            .or_default()
            .insert(object.to_string());
        self
    }

    pub fn add_typed(&mut self, subject: &str, class: &str, label: &str) -> &mut Self {
        self.add(subject, INSTANCE_OF, class);
        if !label.is_empty() {
            self.set_label(subject, label);
        }
        self
    }

    pub fn set_label(&mut self, subject: &str, label: &str) -> &mut Self {
        self.labels.insert(subject.to_string(), label.to_string());
        self
    }

    /// Parses a TSV of `subject \t property \t object` rows. The pseudo
    /// property `label` sets an entity label. `#` starts a comment line.
    pub fn parse_tsv(id: impl Into<String>, text: &str) -> Result<Self, IngestError> {
        let mut kb = FixtureKb::new(id);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(IngestError::MalformedRow {
                    line: i + 1,
                    column: cols.len().min(3) + 1,
                    message: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            if cols[1] == "label" {
                kb.set_label(cols[0], cols[2]);
            } else {
                kb.add(cols[0], cols[1], cols[2]);
            }
        }
        Ok(kb)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_tsv(format!("fixture:{}", path.display()), &text)
    }

    fn subjects_with(&self, property: &str) -> BTreeSet<&str> {
        self.triples
            .get(property)
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    fn instances_of<'a>(&'a self, type_property: &str, class: &'a str) -> BTreeSet<&'a str> {
        self.triples
            .get(type_property)
            .map(|m| {
                m.iter()
                    .filter(|(_, objs)| objs.contains(class))
                    .map(|(s, _)| s.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    fn gap<'a>(&'a self, type_property: &str, class: &'a str, property: &str) -> Vec<&'a str> {
        let holders = self.subjects_with(property);
        let mut gap: Vec<&str> = self
            .instances_of(type_property, class)
            .into_iter()
            .filter(|s| !holders.contains(s))
            .collect();
        // ORDER BY ?item compares full IRIs.
        gap.sort_by_key(|s| format!("{ENTITY_PREFIX}{s}"));
        gap
    }

    fn count_result(count: u64) -> SparqlResults {
        let mut row = HashMap::new();
        row.insert("count".to_string(), SparqlTerm::integer(count));
        let mut r = SparqlResults::default();
        r.head.vars = vec!["count".into()];
        r.results.bindings.push(row);
        r
    }
}

#[async_trait]
impl SparqlEndpoint for FixtureKb {
    fn id(&self) -> &str {
        &self.id
    }

    async fn select(&self, query: &str) -> Result<SparqlResults, IngestError> {
        let p = patterns();
        if let Some(c) = p.missing.captures(query) {
            let gap = self.gap(&c[1], &c[2], &c[3]);
            let offset = p
                .offset
                .captures(query)
                .map(|c| c[1].parse::<usize>().unwrap())
                .unwrap_or(0);
            let limit = p
                .limit
                .captures(query)
                .map(|c| c[1].parse::<usize>().unwrap())
                .unwrap_or(usize::MAX);
            let mut r = SparqlResults::default();
            r.head.vars = vec!["item".into(), "itemLabel".into()];
            for s in gap.into_iter().skip(offset).take(limit) {
                let mut row = HashMap::new();
                row.insert("item".to_string(), SparqlTerm::uri(format!("{ENTITY_PREFIX}{s}")));
                if let Some(label) = self.labels.get(s) {
                    row.insert("itemLabel".to_string(), SparqlTerm::literal(label, Some("en")));
                }
                r.results.bindings.push(row);
            }
            return Ok(r);
        }
        if let Some(c) = p.count_missing.captures(query) {
            return Ok(Self::count_result(self.gap(&c[1], &c[2], &c[3]).len() as u64));
        }
        if let Some(c) = p.count_statements.captures(query) {
            let n = self
                .triples
                .get(&c[1])
                .map(|m| m.values().map(BTreeSet::len).sum::<usize>())
                .unwrap_or(0);
            return Ok(Self::count_result(n as u64));
        }
        Err(IngestError::Endpoint {
            retryable: false,
            query: query.to_string(),
            message: "fixture endpoint does not understand this query".into(),
        })
    }
}
