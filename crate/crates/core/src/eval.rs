//! Classification metrics and error analysis.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::citation_sentence;
use crate::corpus::{Label, PaperDoc, SectionCategory};
use crate::features::{normalize_token, reference_features, stem, FeatureError, FeatureSettings};
use crate::heuristics::format_2dp;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {predicted}")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("no examples to score")]
    Empty,
    #[error("example {0} is unlabeled")]
    Unlabeled(usize),
    #[error("prediction for unknown reference {paper_id}/{ref_id}")]
    UnknownReference { paper_id: String, ref_id: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Harmonic mean, defined as 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn new(precision: f64, recall: f64) -> Self {
        ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        ClassMetrics::new(div(tp, tp + fp), div(tp, tp + fn_))
    }
}

/// Counts with `baseline` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub baseline: ClassMetrics,
    pub non_baseline: ClassMetrics,
    /// Unweighted mean of the two per-class metrics.
    pub overall: ClassMetrics,
    pub confusion: Option<ConfusionCounts>,
}

impl MetricsReport {
    pub fn from_per_class(baseline: ClassMetrics, non_baseline: ClassMetrics) -> Self {
        let mean = |a: f64, b: f64| (a + b) / 2.0;
        MetricsReport {
            baseline,
            non_baseline,
            overall: ClassMetrics {
                precision: mean(baseline.precision, non_baseline.precision),
                recall: mean(baseline.recall, non_baseline.recall),
                f1: mean(baseline.f1, non_baseline.f1),
            },
            confusion: None,
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.confusion.map(|c| {
            let n = c.tp + c.fp + c.fn_ + c.tn;
            (c.tp + c.tn) as f64 / n as f64
        })
    }

    /// Deterministic machine-readable summary.
    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["class", "precision", "recall", "f1"])?;
        for (name, m) in self.rows() {
            w.write_record([
                name.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn rows(&self) -> [(&'static str, ClassMetrics); 3] {
        [
            ("baseline", self.baseline),
            ("non_baseline", self.non_baseline),
            ("overall", self.overall),
        ]
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>10}{:>8}{:>6}", "class", "precision", "recall", "f1")?;
        for (name, m) in self.rows() {
            writeln!(
                f,
                "{:<14}{:>10}{:>8}{:>6}",
                name,
                format_2dp(m.precision),
                format_2dp(m.recall),
                format_2dp(m.f1)
            )?;
        }
        if let Some(c) = self.confusion {
            writeln!(f, "tp={} fp={} fn={} tn={}", c.tp, c.fp, c.fn_, c.tn)?;
        }
        Ok(())
    }
}

pub fn compute_metrics(gold: &[Label], predicted: &[Label]) -> Result<MetricsReport, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (i, (&g, &p)) in gold.iter().zip(predicted).enumerate() {
        match (g, p) {
            (Label::Baseline, Label::Baseline) => c.tp += 1,
            (Label::NonBaseline, Label::Baseline) => c.fp += 1,
            (Label::Baseline, Label::NonBaseline) => c.fn_ += 1,
            (Label::NonBaseline, Label::NonBaseline) => c.tn += 1,
            _ => return Err(EvalError::Unlabeled(i)),
        }
    }
    let mut report = MetricsReport::from_per_class(
        ClassMetrics::from_counts(c.tp, c.fp, c.fn_),
        ClassMetrics::from_counts(c.tn, c.fn_, c.fp),
    );
    report.confusion = Some(c);
    Ok(report)
}

/// A model decision for one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePrediction {
    pub paper_id: String,
    pub ref_id: String,
    pub predicted: Label,
    pub prob_baseline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorBucket {
    DatasetCitation,
    FutureWork,
    SharedContext,
    TableOnly,
    Other,
}

impl ErrorBucket {
    pub const ALL: [ErrorBucket; 5] = [
        ErrorBucket::DatasetCitation,
        ErrorBucket::FutureWork,
        ErrorBucket::SharedContext,
        ErrorBucket::TableOnly,
        ErrorBucket::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorBucket::DatasetCitation => "dataset_citation",
            ErrorBucket::FutureWork => "future_work",
            ErrorBucket::SharedContext => "shared_context",
            ErrorBucket::TableOnly => "table_only",
            ErrorBucket::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub paper_id: String,
    pub ref_id: String,
    pub gold: Label,
    pub predicted: Label,
    pub prob_baseline: f64,
    pub citation_sentence: Option<String>,
    pub section: Option<SectionCategory>,
    pub features: Vec<f64>,
    pub buckets: Vec<ErrorBucket>,
}

impl ErrorEntry {
    pub fn kind(&self) -> &'static str {
        if self.predicted == Label::Baseline {
            "false_positive"
        } else {
            "false_negative"
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub errors: Vec<ErrorEntry>,
}

const DATASET_STEMS: [&str; 2] = ["dataset", "corpu"];

/// Collects every misclassified labeled reference and tags the heuristic
/// buckets it falls into. A reference can sit in several buckets; `other`
/// is used only when none applies.
pub fn error_report(
    docs: &[PaperDoc],
    predictions: &[ReferencePrediction],
    settings: &FeatureSettings,
) -> Result<ErrorReport, EvalError> {
    let by_id: HashMap<&str, &PaperDoc> = docs.iter().map(|d| (d.paper_id.as_str(), d)).collect();
    let mut errors = Vec::new();
    for p in predictions {
        let unknown = || EvalError::UnknownReference {
            paper_id: p.paper_id.clone(),
            ref_id: p.ref_id.clone(),
        };
        let doc = by_id.get(p.paper_id.as_str()).ok_or_else(unknown)?;
        let reference = doc.reference(&p.ref_id).ok_or_else(unknown)?;
        if !reference.label.is_labeled() || reference.label == p.predicted {
            continue;
        }
        let rf = reference_features(doc, &p.ref_id, settings)?;
        let mut buckets = Vec::new();
        if let Some(w) = &rf.window {
            let dataset = w
                .tokens
                .iter()
                .zip(&w.mask)
                .flat_map(|(t, m)| t.iter().zip(m).filter(|(_, &real)| real).map(|(t, _)| t))
                .any(|t| DATASET_STEMS.contains(&stem(&normalize_token(t)).as_str()));
            if dataset {
                buckets.push(ErrorBucket::DatasetCitation);
            }
        }
        let mentions: Vec<_> = doc.mentions_of(&p.ref_id).collect();
        if mentions
            .iter()
            .any(|m| doc.section_category(m) == Some(SectionCategory::Conclusion))
        {
            buckets.push(ErrorBucket::FutureWork);
        }
        if let Some(m) = &rf.mention {
            let sharing: BTreeSet<&str> = doc
                .mentions
                .iter()
                .filter(|o| {
                    (o.section_index, o.paragraph_index, o.sentence_index)
                        == (m.section_index, m.paragraph_index, m.sentence_index)
                })
                .map(|o| o.ref_id.as_str())
                .collect();
            if sharing.len() >= 2 {
                buckets.push(ErrorBucket::SharedContext);
            }
        }
        if !mentions.is_empty() && mentions.iter().all(|m| m.in_table) {
            buckets.push(ErrorBucket::TableOnly);
        }
        if buckets.is_empty() {
            buckets.push(ErrorBucket::Other);
        }
        let sentence = match &rf.mention {
            Some(m) => Some(citation_sentence(doc, m).map_err(FeatureError::from)?.join(" ")),
            None => None,
        };
        errors.push(ErrorEntry {
            paper_id: p.paper_id.clone(),
            ref_id: p.ref_id.clone(),
            gold: reference.label,
            predicted: p.predicted,
            prob_baseline: p.prob_baseline,
            citation_sentence: sentence,
            section: rf.mention.as_ref().and_then(|m| doc.section_category(m)),
            features: rf.features.to_vec(),
            buckets,
        });
    }
    Ok(ErrorReport { errors })
}

impl ErrorReport {
    pub fn in_bucket(&self, bucket: ErrorBucket) -> impl Iterator<Item = &ErrorEntry> {
        self.errors.iter().filter(move |e| e.buckets.contains(&bucket))
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "paper_id",
            "ref_id",
            "kind",
            "gold",
            "predicted",
            "prob_baseline",
            "buckets",
            "section",
            "citation_sentence",
            "features",
        ])?;
        for e in &self.errors {
            let buckets: Vec<&str> = e.buckets.iter().map(|b| b.as_str()).collect();
            let features: Vec<String> = e.features.iter().map(f64::to_string).collect();
            w.write_record([
                e.paper_id.as_str(),
                e.ref_id.as_str(),
                e.kind(),
                e.gold.as_str(),
                e.predicted.as_str(),
                &e.prob_baseline.to_string(),
                &buckets.join(";"),
                e.section.map_or("", |s| s.as_str()),
                e.citation_sentence.as_deref().unwrap_or(""),
                &features.join(" "),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        if self.errors.is_empty() {
            return "no errors\n".to_string();
        }
        let mut out = String::new();
        for bucket in ErrorBucket::ALL {
            let entries: Vec<_> = self.in_bucket(bucket).collect();
            if entries.is_empty() {
                continue;
            }
            out += &format!("== {} ({}) ==\n", bucket.as_str(), entries.len());
            for e in entries {
                out += &format!(
                    "{}/{} {} p={} [{}]\n    {}\n",
                    e.paper_id,
                    e.ref_id,
                    e.kind(),
                    format_2dp(e.prob_baseline),
                    e.section.map_or("unmentioned", |s| s.as_str()),
                    e.citation_sentence.as_deref().unwrap_or("-"),
                );
            }
        }
        out
    }
}
