use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::config::RelationConfig;
use crate::gateway::{ApiStyle, Gateway, LmProvider, MockProvider, MockTable, OpenAiProvider, RetryPolicy, Transcript};
use crate::ingest::{load_gold_dataset, CachedEndpoint, FixtureKb, GoldDataset, HttpSparqlEndpoint, SparqlEndpoint};
use crate::model::{PromptVariant, RelationSpec};
use crate::pipeline::{Budget, CompletionOptions, CostModel};
use crate::prompting::{CachedSearch, FixtureSearch, HttpSearchProvider, SearchProvider};
use crate::scoring::DEFAULT_PRECISION_RANGE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    /// Deterministic table-backed provider.
    Mock {
        #[serde(default)]
        table: Option<PathBuf>,
        #[serde(default = "default_true")]
        logprobs: bool,
        #[serde(default = "default_mock_price")]
        price_per_1k_tokens: f64,
    },
    /// OpenAI-compatible HTTP API.
    Openai {
        base_url: String,
        model: String,
        #[serde(default = "default_style")]
        style: ApiStyle,
        #[serde(default = "default_key_env")]
        api_key_env: String,
        price_per_1k_tokens: f64,
        #[serde(default)]
        requests_per_second: Option<f64>,
    },
}

fn default_true() -> bool {
    true
}

fn default_mock_price() -> f64 {
    0.02
}

fn default_style() -> ApiStyle {
    ApiStyle::Completion
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Mock {
            table: None,
            logprobs: true,
            price_per_1k_tokens: default_mock_price(),
        }
    }
}

impl ProviderConfig {
    pub fn price_per_1k_tokens(&self) -> f64 {
        match self {
            ProviderConfig::Mock { price_per_1k_tokens, .. } | ProviderConfig::Openai { price_per_1k_tokens, .. } => {
                *price_per_1k_tokens
            }
        }
    }

    pub fn set_price(&mut self, price: f64) {
        match self {
            ProviderConfig::Mock { price_per_1k_tokens, .. } | ProviderConfig::Openai { price_per_1k_tokens, .. } => {
                *price_per_1k_tokens = price
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KbConfig {
    /// Tab-separated triple file answered in memory.
    Fixture { path: PathBuf },
    /// SPARQL endpoint, cached on disk under the cache directory.
    Sparql { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchConfig {
    Fixture {
        path: PathBuf,
    },
    Http {
        #[serde(default = "default_search_url")]
        base_url: String,
        key_env: String,
        engine_env: String,
    },
}

fn default_search_url() -> String {
    HttpSearchProvider::DEFAULT_BASE_URL.into()
}

/// Settings shared by every command. Loaded from TOML; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Relation config file; the bundled relations when unset.
    pub relations: Option<PathBuf>,
    /// Relation ids or names to process; all when empty.
    pub only: Vec<String>,
    pub gold: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub variant: PromptVariant,
    pub few_shot: Option<usize>,
    pub target_precision: Option<f64>,
    pub precision_range: (f64, f64),
    pub max_in_flight: usize,
    pub page_size: usize,
    pub max_subjects: Option<usize>,
    pub all_objects: bool,
    /// Tab-separated gap counts for `estimate`.
    pub gap_reports: Option<PathBuf>,
    /// Reviewed accuracy per relation id or name.
    pub manual_accuracy: BTreeMap<String, f64>,
    pub provider: ProviderConfig,
    pub kb: Option<KbConfig>,
    pub search: Option<SearchConfig>,
    pub budget: Budget,
    pub avg_prompt_tokens: f64,
    pub retention_rate: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            relations: None,
            only: Vec::new(),
            gold: None,
            cache_dir: PathBuf::from(".kbc-cache"),
            output_dir: PathBuf::from("out"),
            variant: PromptVariant::Standard,
            few_shot: None,
            target_precision: None,
            precision_range: DEFAULT_PRECISION_RANGE,
            max_in_flight: 8,
            page_size: 10_000,
            max_subjects: None,
            all_objects: false,
            gap_reports: None,
            manual_accuracy: BTreeMap::new(),
            provider: ProviderConfig::default(),
            kb: None,
            search: None,
            budget: Budget::unlimited(),
            avg_prompt_tokens: crate::pipeline::DEFAULT_AVG_PROMPT_TOKENS,
            retention_rate: crate::pipeline::DEFAULT_RETENTION_RATE,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses a TOML config. Relative paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("run config: {e}")))?;
        for p in [&mut config.relations, &mut config.gold, &mut config.gap_reports]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        resolve(base, &mut config.cache_dir);
        resolve(base, &mut config.output_dir);
        if let ProviderConfig::Mock { table: Some(p), .. } = &mut config.provider {
            resolve(base, p);
        }
        if let Some(KbConfig::Fixture { path }) = &mut config.kb {
            resolve(base, path);
        }
        if let Some(SearchConfig::Fixture { path }) = &mut config.search {
            resolve(base, path);
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let (lo, hi) = self.precision_range;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(CliError::Config(format!("precision_range [{lo}, {hi}] is invalid")));
        }
        if self.budget.max_spend.is_some_and(|s| s.is_nan() || s < 0.0) {
            return Err(CliError::Config("max_spend must be non-negative".into()));
        }
        if let Some(t) = self.target_precision {
            if !(t > 0.0 && t <= 1.0) {
                return Err(CliError::Config(format!("target_precision {t} is outside (0, 1]")));
            }
        }
        if let Some(k) = self.few_shot {
            if !(1..=crate::pipeline::MAX_FEW_SHOT).contains(&k) {
                return Err(CliError::Config(format!("few_shot {k} is outside 1..=12")));
            }
        }
        for (rel, a) in &self.manual_accuracy {
            if !(0.0..=1.0).contains(a) {
                return Err(CliError::Config(format!("manual accuracy for {rel} is outside [0, 1]")));
            }
        }
        self.cost_model().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            price_per_1k_tokens: self.provider.price_per_1k_tokens(),
            avg_prompt_tokens: self.avg_prompt_tokens,
            retention_rate: self.retention_rate,
        }
    }

    pub fn relation_config(&self) -> Result<RelationConfig, CliError> {
        match &self.relations {
            Some(p) => RelationConfig::load(p).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(RelationConfig::bundled()),
        }
    }

    /// Relations selected by `only`, in config order, with overrides applied.
    pub fn selected_specs(&self, relations: &RelationConfig) -> Result<Vec<RelationSpec>, CliError> {
        let mut specs: Vec<RelationSpec> = if self.only.is_empty() {
            relations.relations.clone()
        } else {
            self.only
                .iter()
                .map(|key| relations.get(key).cloned().map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<_, _>>()?
        };
        for spec in &mut specs {
            if let Some(k) = self.few_shot {
                spec.few_shot_count = k;
            }
            if let Some(t) = self.target_precision {
                spec.target_precision = t;
            }
        }
        Ok(specs)
    }

    pub fn manual_accuracy_for(&self, spec: &RelationSpec) -> Option<f64> {
        self.manual_accuracy
            .get(&spec.id)
            .or_else(|| self.manual_accuracy.get(&spec.name))
            .copied()
    }

    pub fn gold_dataset(&self) -> Result<GoldDataset, CliError> {
        let path = self
            .gold
            .as_ref()
            .ok_or_else(|| CliError::Config("no gold dataset configured".into()))?;
        load_gold_dataset(path).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn provider(&self) -> Result<Arc<dyn LmProvider>, CliError> {
        match &self.provider {
            ProviderConfig::Mock { table, logprobs, .. } => {
                let table = match table {
                    Some(p) => MockTable::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                    None => MockTable::default(),
                };
                let mut mock = MockProvider::from_table(table);
                if !logprobs {
                    mock = mock.without_logprobs();
                }
                Ok(Arc::new(mock))
            }
            ProviderConfig::Openai { base_url, model, style, api_key_env, .. } => {
                let p = OpenAiProvider::from_env(base_url.clone(), model.clone(), *style, api_key_env)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Arc::new(p))
            }
        }
    }

    /// Gateway with a per-provider transcript under the cache directory.
    pub fn gateway(&self) -> Result<Gateway, CliError> {
        let provider = self.provider()?;
        let name: String = provider
            .id()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        let path = self.cache_dir.join("transcripts").join(format!("{name}.jsonl"));
        let transcript = Transcript::open(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let mut gateway = Gateway::new(provider)
            .with_transcript(transcript)
            .with_price(self.provider.price_per_1k_tokens());
        if let ProviderConfig::Mock { .. } = self.provider {
            gateway = gateway.with_retry(RetryPolicy::immediate(1));
        }
        if let ProviderConfig::Openai { requests_per_second: Some(rps), .. } = self.provider {
            gateway = gateway.with_rate_limit(rps);
        }
        Ok(gateway)
    }

    pub fn endpoint(&self) -> Result<Box<dyn SparqlEndpoint>, CliError> {
        match &self.kb {
            None => Err(CliError::Config("no knowledge base configured".into())),
            Some(KbConfig::Fixture { path }) => Ok(Box::new(
                FixtureKb::load(path).map_err(|e| CliError::Config(e.to_string()))?,
            )),
            Some(KbConfig::Sparql { url }) => {
                let http = HttpSparqlEndpoint::new(url.clone()).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Box::new(CachedEndpoint::new(http, self.cache_dir.join("sparql"))))
            }
        }
    }

    pub fn search_provider(&self) -> Result<Option<Arc<dyn SearchProvider>>, CliError> {
        let dir = self.cache_dir.join("search");
        Ok(match &self.search {
            None => None,
            Some(SearchConfig::Fixture { path }) => {
                let fixture = FixtureSearch::load(path).map_err(|e| CliError::Config(e.to_string()))?;
                Some(Arc::new(fixture))
            }
            Some(SearchConfig::Http { base_url, key_env, engine_env }) => {
                let http = HttpSearchProvider::from_env(base_url.clone(), key_env, engine_env)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Some(Arc::new(CachedSearch::new(http, dir)))
            }
        })
    }

    pub fn completion_options(&self) -> Result<CompletionOptions, CliError> {
        Ok(CompletionOptions {
            variant: self.variant,
            precision_range: self.precision_range,
            max_in_flight: self.max_in_flight.max(1),
            page_size: self.page_size.max(1),
            max_subjects: self.max_subjects,
            all_objects: self.all_objects,
            manual_accuracy: None,
            search: self.search_provider()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
            gold = "gold.tsv"
            output_dir = "/tmp/out"
            variant = "dont_know"
            only = ["nativeLanguage"]
            precision_range = [0.8, 0.95]

            [manual_accuracy]
            P103 = 0.82

            [provider]
            kind = "openai"
            base_url = "https://api.example.org/v1"
            model = "m"
            price_per_1k_tokens = 0.02

            [kb]
            kind = "fixture"
            path = "kb.tsv"

            [budget]
            max_queries = 10
        "#;
        let c = RunConfig::from_toml_str(text, Path::new("/base")).unwrap();
        assert_eq!(c.gold, Some(PathBuf::from("/base/gold.tsv")));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/out"));
        assert_eq!(c.variant, PromptVariant::DontKnow);
        assert_eq!(c.budget.max_queries, Some(10));
        assert_eq!(c.kb, Some(KbConfig::Fixture { path: "/base/kb.tsv".into() }));
        assert_eq!(c.provider.price_per_1k_tokens(), 0.02);
        c.validate().unwrap();
        let specs = c.selected_specs(&RelationConfig::bundled()).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(c.manual_accuracy_for(&specs[0]), Some(0.82));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml_str("bogus = 1", Path::new(".")).is_err());
        let mut c = RunConfig::default();
        c.budget.max_spend = Some(-1.0);
        assert!(c.validate().is_err());
        let c = RunConfig {
            only: vec!["noSuchRelation".into()],
            ..RunConfig::default()
        };
        assert!(c.selected_specs(&RelationConfig::bundled()).is_err());
    }
}
