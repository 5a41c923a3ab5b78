//! Relation configuration file: one `[[relation]]` table per relation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::RelationSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid relation: {0}")]
    Invalid(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationConfig {
    #[serde(rename = "relation", default)]
    pub relations: Vec<RelationSpec>,
}

impl RelationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::parse(text, "<string>")
    }

    fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: RelationConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        for spec in &cfg.relations {
            spec.validate().map_err(ConfigError::Invalid)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("relation config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        crate::util::write_atomic(path, self.to_toml_string().as_bytes()).map_err(|source| {
            ConfigError::Io {
                path: path.display().to_string(),
                source,
            }
        })
    }

    /// Looks a relation up by property id or by name.
    pub fn get(&self, key: &str) -> Result<&RelationSpec, ConfigError> {
        self.relations
            .iter()
            .find(|r| r.id == key || r.name == key)
            .ok_or_else(|| ConfigError::UnknownRelation(key.to_string()))
    }

    pub fn get_mut(&mut self, key: &str) -> Result<&mut RelationSpec, ConfigError> {
        self.relations
            .iter_mut()
            .find(|r| r.id == key || r.name == key)
            .ok_or_else(|| ConfigError::UnknownRelation(key.to_string()))
    }

    /// The relation configuration bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_toml_str(include_str!("../data/relations.toml"))
            .expect("bundled relation config is valid")
    }
}
