//! Keyword mapping from raw section headings to [`SectionCategory`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SectionCategory;

pub const DEFAULT_KEYWORDS_TOML: &str = include_str!("../config/section_keywords.toml");
pub const KEYWORDS_VERSION: &str = "section-keywords/1";

#[derive(Debug, Error)]
pub enum KeywordTableError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("keyword table: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryKeywords {
    pub name: SectionCategory,
    pub keywords: Vec<String>,
}

/// Ordered keyword table. Earlier categories take priority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordTable {
    pub version: String,
    #[serde(rename = "category")]
    pub categories: Vec<CategoryKeywords>,
}

impl Default for KeywordTable {
    fn default() -> Self {
        KeywordTable::from_toml(DEFAULT_KEYWORDS_TOML).expect("bundled keyword table parses")
    }
}

impl KeywordTable {
    pub fn from_toml(text: &str) -> Result<Self, KeywordTableError> {
        let table: KeywordTable = toml::from_str(text).map_err(|e| KeywordTableError::Parse(e.to_string()))?;
        if table.version != KEYWORDS_VERSION {
            return Err(KeywordTableError::Parse(format!(
                "unsupported version `{}`",
                table.version
            )));
        }
        if table.categories.iter().any(|c| c.name == SectionCategory::Other) {
            return Err(KeywordTableError::Parse(
                "`other` is the fallback and takes no keywords".into(),
            ));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, KeywordTableError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn categorize(&self, heading: &str) -> SectionCategory {
        let lowered = heading.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        self.categories
            .iter()
            .find(|c| c.keywords.iter().any(|k| lowered.contains(k.as_str())))
            .map(|c| c.name)
            .unwrap_or(SectionCategory::Other)
    }
}

/// Categorizes with the bundled default table.
pub fn categorize_heading(heading: &str) -> SectionCategory {
    thread_local! {
        static TABLE: KeywordTable = KeywordTable::default();
    }
    TABLE.with(|t| t.categorize(heading))
}
