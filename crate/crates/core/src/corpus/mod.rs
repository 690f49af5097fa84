//! Document model for annotated scholarly corpora.
//!
//! A corpus arrives pre-sentence-split and pre-tokenized: each [`PaperDoc`]
//! holds its sections as paragraphs of sentences of tokens, the bibliography
//! as [`Reference`]s, and every in-text occurrence of a reference as a
//! [`CitationMention`] addressing a single sentence.

mod agreement;
mod filter;
mod io;
mod split;
pub mod synthetic;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::cohens_kappa;
pub use filter::{filter_papers, matched_filter_keyword, FILTER_KEYWORDS};
pub use io::{
    apply_annotations, load_corpus, read_annotations, read_paper, write_annotations, write_corpus, write_paper,
    Annotation, Manifest, MANIFEST_FILE, SCHEMA_VERSION,
};
pub use split::{assign_splits, SplitSpec, SplitUnit};

pub type Sentence = Vec<String>;
pub type Paragraph = Vec<Sentence>;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("paper `{paper_id}`: field `{field}`: {message}")]
    Schema {
        paper_id: String,
        field: String,
        message: String,
    },
    #[error("paper `{paper_id}`: {message}")]
    Integrity { paper_id: String, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("annotations: {0}")]
    Annotation(String),
    #[error("split: {0}")]
    Split(String),
    #[error("agreement: {0}")]
    Agreement(String),
}

/// The five canonical section buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionCategory {
    Introduction,
    Related,
    MethodsResults,
    Conclusion,
    Other,
}

impl SectionCategory {
    /// Canonical order used for feature vectors and report tables.
    pub const ALL: [SectionCategory; 5] = [
        SectionCategory::Introduction,
        SectionCategory::Related,
        SectionCategory::MethodsResults,
        SectionCategory::Conclusion,
        SectionCategory::Other,
    ];

    pub fn index(self) -> usize {
        match self {
            SectionCategory::Introduction => 0,
            SectionCategory::Related => 1,
            SectionCategory::MethodsResults => 2,
            SectionCategory::Conclusion => 3,
            SectionCategory::Other => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SectionCategory::Introduction => "introduction",
            SectionCategory::Related => "related",
            SectionCategory::MethodsResults => "methods_results",
            SectionCategory::Conclusion => "conclusion",
            SectionCategory::Other => "other",
        }
    }
}

impl fmt::Display for SectionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown section category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Baseline,
    NonBaseline,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Baseline => "baseline",
            Label::NonBaseline => "non_baseline",
            Label::Unlabeled => "unlabeled",
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Label::Baseline),
            "non_baseline" => Ok(Label::NonBaseline),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Dev,
    Test,
    #[default]
    Unassigned,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Dev => "dev",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "dev" => Ok(SplitTag::Dev),
            "test" => Ok(SplitTag::Test),
            "unassigned" => Ok(SplitTag::Unassigned),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    pub heading: String,
    pub category: SectionCategory,
    pub paragraphs: Vec<Paragraph>,
    /// `(paragraph_index, sentence_index)` pairs holding tabular content.
    pub table_regions: Vec<(usize, usize)>,
}

impl Section {
    pub fn is_table(&self, paragraph: usize, sentence: usize) -> bool {
        self.table_regions.contains(&(paragraph, sentence))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub ref_id: String,
    pub raw_string: String,
    pub cited_title: String,
    pub cited_year: Option<i32>,
    /// Global citation count of the cited paper, when known.
    pub citation_count: Option<u64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitationMention {
    pub ref_id: String,
    pub section_index: usize,
    pub paragraph_index: usize,
    pub sentence_index: usize,
    /// Index of the mention's first token within its sentence.
    pub token_offset: usize,
    pub in_table: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperDoc {
    pub paper_id: String,
    pub title: Vec<String>,
    #[serde(rename = "abstract")]
    pub abstract_: Vec<String>,
    pub venue: String,
    pub year: i32,
    pub sections: Vec<Section>,
    pub references: Vec<Reference>,
    pub mentions: Vec<CitationMention>,
    pub split_tag: SplitTag,
}

impl PaperDoc {
    pub fn reference(&self, ref_id: &str) -> Option<&Reference> {
        self.references.iter().find(|r| r.ref_id == ref_id)
    }

    pub fn mentions_of<'a>(&'a self, ref_id: &'a str) -> impl Iterator<Item = &'a CitationMention> + 'a {
        self.mentions.iter().filter(move |m| m.ref_id == ref_id)
    }

    pub fn sentence(&self, mention: &CitationMention) -> Option<&Sentence> {
        self.sections
            .get(mention.section_index)?
            .paragraphs
            .get(mention.paragraph_index)?
            .get(mention.sentence_index)
    }

    pub fn section_category(&self, mention: &CitationMention) -> Option<SectionCategory> {
        self.sections.get(mention.section_index).map(|s| s.category)
    }

    /// Title followed by abstract, the citing paper's summary text.
    pub fn title_abstract(&self) -> Vec<String> {
        self.title.iter().chain(self.abstract_.iter()).cloned().collect()
    }

    pub fn is_annotated(&self) -> bool {
        !self.references.is_empty() && self.references.iter().all(|r| r.label.is_labeled())
    }

    /// Checks every structural invariant of a single document.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let integrity = |message: String| CorpusError::Integrity {
            paper_id: self.paper_id.clone(),
            message,
        };
        if self.paper_id.is_empty() {
            return Err(CorpusError::Schema {
                paper_id: String::new(),
                field: "paper_id".into(),
                message: "must not be empty".into(),
            });
        }
        if !(1900..=2100).contains(&self.year) {
            return Err(CorpusError::Schema {
                paper_id: self.paper_id.clone(),
                field: "year".into(),
                message: format!("{} outside [1900, 2100]", self.year),
            });
        }
        let mut ids = HashSet::new();
        for r in &self.references {
            if !ids.insert(r.ref_id.as_str()) {
                return Err(integrity(format!("duplicate ref_id `{}`", r.ref_id)));
            }
        }
        for (si, section) in self.sections.iter().enumerate() {
            for &(p, s) in &section.table_regions {
                let ok = section.paragraphs.get(p).is_some_and(|para| s < para.len());
                if !ok {
                    return Err(integrity(format!(
                        "section {si}: table region ({p}, {s}) addresses no sentence"
                    )));
                }
            }
        }
        for (mi, m) in self.mentions.iter().enumerate() {
            if !ids.contains(m.ref_id.as_str()) {
                return Err(integrity(format!(
                    "mention {mi} references unknown ref_id `{}`",
                    m.ref_id
                )));
            }
            let sentence = self.sentence(m).ok_or_else(|| {
                integrity(format!(
                    "mention {mi} addresses missing sentence ({}, {}, {})",
                    m.section_index, m.paragraph_index, m.sentence_index
                ))
            })?;
            if m.token_offset >= sentence.len() {
                return Err(integrity(format!(
                    "mention {mi} token_offset {} beyond sentence length {}",
                    m.token_offset,
                    sentence.len()
                )));
            }
            let flagged = self.sections[m.section_index].is_table(m.paragraph_index, m.sentence_index);
            if flagged != m.in_table {
                return Err(integrity(format!(
                    "mention {mi} in_table={} disagrees with table_regions",
                    m.in_table
                )));
            }
        }
        Ok(())
    }
}

/// Validates each document and the corpus-wide `paper_id` uniqueness.
pub fn validate_corpus(docs: &[PaperDoc]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for doc in docs {
        doc.validate()?;
        if !seen.insert(doc.paper_id.as_str()) {
            return Err(CorpusError::Integrity {
                paper_id: doc.paper_id.clone(),
                message: "duplicate paper_id in corpus".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    pub(crate) fn tiny_doc() -> PaperDoc {
        PaperDoc {
            paper_id: "P1".into(),
            title: toks("neural parsing"),
            abstract_: toks("we parse things"),
            venue: "Proceedings of EMNLP".into(),
            year: 2012,
            sections: vec![Section {
                heading: "4 Experiments".into(),
                category: SectionCategory::MethodsResults,
                paragraphs: vec![vec![toks("we compare with [R1] here"), toks("R1 | 90.1")]],
                table_regions: vec![(0, 1)],
            }],
            references: vec![Reference {
                ref_id: "R1".into(),
                raw_string: "Smith 2010".into(),
                cited_title: "Old parser".into(),
                cited_year: Some(2010),
                citation_count: Some(12),
                label: Label::Baseline,
            }],
            mentions: vec![
                CitationMention {
                    ref_id: "R1".into(),
                    section_index: 0,
                    paragraph_index: 0,
                    sentence_index: 0,
                    token_offset: 3,
                    in_table: false,
                },
                CitationMention {
                    ref_id: "R1".into(),
                    section_index: 0,
                    paragraph_index: 0,
                    sentence_index: 1,
                    token_offset: 0,
                    in_table: true,
                },
            ],
            split_tag: SplitTag::Unassigned,
        }
    }

    #[test]
    fn valid_doc_passes() {
        tiny_doc().validate().unwrap();
    }

    #[test]
    fn dangling_ref_is_integrity_error() {
        let mut doc = tiny_doc();
        doc.mentions[0].ref_id = "R9".into();
        assert!(matches!(doc.validate(), Err(CorpusError::Integrity { .. })));
    }

    #[test]
    fn table_flag_must_match_regions() {
        let mut doc = tiny_doc();
        doc.mentions[1].in_table = false;
        assert!(matches!(doc.validate(), Err(CorpusError::Integrity { .. })));
    }

    #[test]
    fn offset_beyond_sentence_rejected() {
        let mut doc = tiny_doc();
        doc.mentions[0].token_offset = 99;
        assert!(doc.validate().is_err());
    }

    #[test]
    fn year_range_enforced() {
        let mut doc = tiny_doc();
        doc.year = 1850;
        assert!(matches!(doc.validate(), Err(CorpusError::Schema { ref field, .. }) if field == "year"));
    }

    #[test]
    fn duplicate_paper_ids_rejected() {
        let docs = vec![tiny_doc(), tiny_doc()];
        assert!(validate_corpus(&docs).is_err());
    }

    #[test]
    fn enums_round_trip_strings() {
        for c in SectionCategory::ALL {
            assert_eq!(c.as_str().parse::<SectionCategory>().unwrap(), c);
        }
        for l in [Label::Baseline, Label::NonBaseline, Label::Unlabeled] {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
    }
}
