//! Non-textual reference features: where a reference is cited, whether it
//! appears in a table, which cue words surround it, and how often it is
//! cited globally.

pub mod citations;
mod stem;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::context::{
    extract_window_with, representative_mention, ContextError, ContextWindow, WindowShape, PAD_TOKEN,
};
use crate::corpus::{CitationMention, PaperDoc, SectionCategory};

pub use stem::{normalize_token, stem};

pub const CUE_COUNT: usize = 45;
/// 5 section counts, table flag, cue weights, citation count.
pub const FEATURE_DIM: usize = 5 + 1 + CUE_COUNT + 1;

/// Stemmed cue words observed around baseline citations.
pub const DEFAULT_CUES: [&str; CUE_COUNT] = [
    "among",
    "base",
    "origin",
    "precis",
    "modifi",
    "highest",
    "implement",
    "extend",
    "signific",
    "maximum",
    "metric",
    "higher",
    "experi",
    "baselin",
    "fscore",
    "strategi",
    "accord",
    "compar",
    "overal",
    "perform",
    "best",
    "previou",
    "model",
    "evalu",
    "correl",
    "recal",
    "result",
    "calcul",
    "standard",
    "stateoftheart",
    "achiev",
    "figur",
    "accuraci",
    "gold",
    "comparison",
    "method",
    "top",
    "yield",
    "procedur",
    "obtain",
    "outperform",
    "score",
    "significantli",
    "increas",
    "report",
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("paper `{paper_id}` has no reference `{ref_id}`")]
    UnknownReference { paper_id: String, ref_id: String },
    #[error("cue lexicon: {0}")]
    Lexicon(String),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueLexicon {
    stems: Vec<String>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        CueLexicon {
            stems: DEFAULT_CUES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CueLexicon {
    pub fn new(stems: Vec<String>) -> Result<Self, FeatureError> {
        if stems.len() != CUE_COUNT {
            return Err(FeatureError::Lexicon(format!(
                "expected {CUE_COUNT} stems, got {}",
                stems.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &stems {
            if s.is_empty() || *s != s.to_lowercase() {
                return Err(FeatureError::Lexicon(format!("stem `{s}` must be nonempty lowercase")));
            }
            if !seen.insert(s.as_str()) {
                return Err(FeatureError::Lexicon(format!("duplicate stem `{s}`")));
            }
        }
        Ok(CueLexicon { stems })
    }

    /// One stem per line; blank lines and `#` comments are skipped.
    pub fn load(path: &std::path::Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path)?;
        let stems = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Self::new(stems)
    }

    pub fn stems(&self) -> &[String] {
        &self.stems
    }

    /// Lexicon position matched by a raw token, if any.
    pub fn match_token(&self, token: &str) -> Option<usize> {
        if token == PAD_TOKEN {
            return None;
        }
        let normalized = normalize_token(token);
        if normalized.is_empty() {
            return None;
        }
        let stemmed = stem(&normalized);
        self.stems.iter().position(|s| *s == stemmed || *s == normalized)
    }

    /// Hex SHA-256 over the newline-joined stems; pins checkpoints to a lexicon.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.stems.join("\n").as_bytes());
        hex::encode(digest)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountTransform {
    #[default]
    Log1p,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Ordered as [`SectionCategory::ALL`].
    pub section_counts: [u32; 5],
    pub in_table: bool,
    pub cue_weights: Vec<f64>,
    pub citation_count_feature: f64,
}

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector {
            section_counts: [0; 5],
            in_table: false,
            cue_weights: vec![0.0; CUE_COUNT],
            citation_count_feature: 0.0,
        }
    }

    /// Reference-location family: five counts and the table flag.
    pub fn location_family(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.section_counts.iter().map(|&c| c as f64).collect();
        v.push(if self.in_table { 1.0 } else { 0.0 });
        v
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.location_family();
        v.extend_from_slice(&self.cue_weights);
        v.push(self.citation_count_feature);
        v
    }
}

/// Mentions per section category and whether any mention is in a table.
pub fn location_features(doc: &PaperDoc, ref_id: &str) -> Result<([u32; 5], bool), FeatureError> {
    if doc.reference(ref_id).is_none() {
        return Err(FeatureError::UnknownReference {
            paper_id: doc.paper_id.clone(),
            ref_id: ref_id.to_string(),
        });
    }
    let mut counts = [0u32; 5];
    let mut in_table = false;
    for m in doc.mentions_of(ref_id) {
        let category = doc.section_category(m).unwrap_or(SectionCategory::Other);
        counts[category.index()] += 1;
        in_table |= m.in_table;
    }
    Ok((counts, in_table))
}

/// Weight `1 / max(1, d)` of the nearest occurrence of each cue stem, where
/// `d` is the token distance to the mention over the window's real tokens.
pub fn cue_weights(window: &ContextWindow, lexicon: &CueLexicon) -> Vec<f64> {
    let tokens = window.flattened();
    let anchor = window.mention_position();
    let mut weights = vec![0.0; lexicon.stems().len()];
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(k) = lexicon.match_token(tok) {
            let distance = i.abs_diff(anchor).max(1);
            let w = 1.0 / distance as f64;
            if w > weights[k] {
                weights[k] = w;
            }
        }
    }
    weights
}

pub fn citation_count_feature(count: Option<u64>, transform: CountTransform) -> f64 {
    match (count, transform) {
        (None, _) => 0.0,
        (Some(c), CountTransform::Log1p) => (c as f64).ln_1p(),
        (Some(c), CountTransform::Raw) => c as f64,
    }
}

/// Settings shared by feature extraction and the model input pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSettings {
    pub lexicon: CueLexicon,
    pub shape: WindowShape,
    pub count_transform: CountTransform,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            lexicon: CueLexicon::default(),
            shape: WindowShape::default(),
            count_transform: CountTransform::Log1p,
        }
    }
}

/// Everything derived for one reference: its feature vector and, when it is
/// mentioned at all, the representative mention and its window.
#[derive(Debug, Clone)]
pub struct ReferenceFeatures {
    pub features: FeatureVector,
    pub mention: Option<CitationMention>,
    pub window: Option<ContextWindow>,
}

pub fn reference_features(
    doc: &PaperDoc,
    ref_id: &str,
    settings: &FeatureSettings,
) -> Result<ReferenceFeatures, FeatureError> {
    let (section_counts, in_table) = location_features(doc, ref_id)?;
    let reference = doc.reference(ref_id).expect("checked by location_features");
    let mention = representative_mention(doc, ref_id).cloned();
    let window = match &mention {
        Some(m) => Some(extract_window_with(doc, m, settings.shape)?),
        None => None,
    };
    let cue = window
        .as_ref()
        .map(|w| cue_weights(w, &settings.lexicon))
        .unwrap_or_else(|| vec![0.0; settings.lexicon.stems().len()]);
    Ok(ReferenceFeatures {
        features: FeatureVector {
            section_counts,
            in_table,
            cue_weights: cue,
            citation_count_feature: citation_count_feature(reference.citation_count, settings.count_transform),
        },
        mention,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::extract_window;
    use crate::corpus::{Label, Reference, Section, SplitTag};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn one_sentence_doc(sentence: &str) -> PaperDoc {
        PaperDoc {
            paper_id: "F".into(),
            title: toks("t"),
            abstract_: toks("a"),
            venue: "v".into(),
            year: 2010,
            sections: vec![Section {
                heading: "Results".into(),
                category: SectionCategory::MethodsResults,
                paragraphs: vec![vec![toks(sentence)]],
                table_regions: vec![],
            }],
            references: vec![Reference {
                ref_id: "R".into(),
                raw_string: String::new(),
                cited_title: String::new(),
                cited_year: None,
                citation_count: None,
                label: Label::Unlabeled,
            }],
            mentions: vec![],
            split_tag: SplitTag::Unassigned,
        }
    }

    fn weights_for(sentence: &str) -> Vec<f64> {
        let doc = one_sentence_doc(sentence);
        let offset = toks(sentence).iter().position(|t| t == "[R]").unwrap();
        let m = CitationMention {
            ref_id: "R".into(),
            section_index: 0,
            paragraph_index: 0,
            sentence_index: 0,
            token_offset: offset,
            in_table: false,
        };
        cue_weights(&extract_window(&doc, &m).unwrap(), &CueLexicon::default())
    }

    fn idx(stem: &str) -> usize {
        DEFAULT_CUES.iter().position(|s| *s == stem).unwrap()
    }

    #[test]
    fn default_lexicon_is_valid() {
        let lex = CueLexicon::default();
        CueLexicon::new(lex.stems().to_vec()).unwrap();
        assert_eq!(lex.hash().len(), 64);
    }

    #[test]
    fn adjacency_weighs_one() {
        let w = weights_for("we clearly outperform [R] on this");
        assert_eq!(w[idx("outperform")], 1.0);
    }

    #[test]
    fn distance_four_weighs_quarter() {
        let w = weights_for("baselines x y z [R] w");
        assert_eq!(w[idx("baselin")], 0.25);
    }

    #[test]
    fn nearest_occurrence_wins() {
        // occurrences at distance 7 (before) and 3 (after)
        let w = weights_for("compared a b c d e f [R] g h comparing");
        assert_eq!(w[idx("compar")], 1.0 / 3.0);
    }

    #[test]
    fn absent_cues_are_zero() {
        let w = weights_for("the cat sat on [R] mat");
        assert!(w.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn weights_stay_in_unit_interval() {
        let w = weights_for("best results [R] accuracy significantly higher F-score state-of-the-art");
        assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(w[idx("fscore")], 1.0 / 4.0);
        assert_eq!(w[idx("stateoftheart")], 1.0 / 5.0);
    }

    #[test]
    fn count_transform() {
        assert_eq!(citation_count_feature(Some(0), CountTransform::Log1p), 0.0);
        assert_eq!(citation_count_feature(None, CountTransform::Log1p), 0.0);
        assert!((citation_count_feature(Some(99), CountTransform::Log1p) - 100f64.ln()).abs() < 1e-15);
        assert_eq!(citation_count_feature(Some(99), CountTransform::Raw), 99.0);
    }

    #[test]
    fn location_counts_and_table_flag() {
        let mut doc = one_sentence_doc("see [R] and [R] and [R]");
        doc.sections.insert(
            0,
            Section {
                heading: "Introduction".into(),
                category: SectionCategory::Introduction,
                paragraphs: vec![vec![toks("as [R] shows")]],
                table_regions: vec![],
            },
        );
        let m = |s, o| CitationMention {
            ref_id: "R".into(),
            section_index: s,
            paragraph_index: 0,
            sentence_index: 0,
            token_offset: o,
            in_table: false,
        };
        doc.mentions = vec![m(0, 1), m(1, 1), m(1, 3)];
        doc.validate().unwrap();
        assert_eq!(location_features(&doc, "R").unwrap(), ([1, 0, 2, 0, 0], false));
        assert!(location_features(&doc, "nope").is_err());
    }

    #[test]
    fn unmentioned_reference_is_all_zero() {
        let doc = one_sentence_doc("nothing here");
        let rf = reference_features(&doc, "R", &FeatureSettings::default()).unwrap();
        assert_eq!(rf.features, FeatureVector::zeros());
        assert!(rf.window.is_none());
        assert_eq!(rf.features.to_vec().len(), FEATURE_DIM);
    }

    #[test]
    fn lexicon_validation() {
        assert!(CueLexicon::new(vec!["a".into()]).is_err());
        let mut stems: Vec<String> = DEFAULT_CUES.iter().map(|s| s.to_string()).collect();
        stems[1] = "among".into();
        assert!(CueLexicon::new(stems).is_err());
    }
}
