//! Rule-based classifiers and descriptive corpus statistics.
//!
//! Every aggregate here is a per-document tally merged with `+`, so the
//! tables can be built over any partition of the corpus and summed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{cohens_kappa, Annotation, CorpusError, Label, PaperDoc, SectionCategory};

#[derive(Debug, Error)]
pub enum HeuristicsError {
    #[error("year buckets {0:?} and {1:?} overlap")]
    OverlappingBuckets((i32, i32), (i32, i32)),
    #[error("year bucket {0:?} has lo > hi")]
    InvalidBucket((i32, i32)),
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RuleKind {
    Section(SectionCategory),
    Table,
}

impl RuleKind {
    pub const ALL: [RuleKind; 6] = [
        RuleKind::Section(SectionCategory::Introduction),
        RuleKind::Section(SectionCategory::Related),
        RuleKind::Section(SectionCategory::MethodsResults),
        RuleKind::Section(SectionCategory::Conclusion),
        RuleKind::Section(SectionCategory::Other),
        RuleKind::Table,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Section(c) => c.as_str(),
            RuleKind::Table => "table",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = HeuristicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "table" {
            return Ok(RuleKind::Table);
        }
        s.parse::<SectionCategory>()
            .map(RuleKind::Section)
            .map_err(|_| HeuristicsError::UnknownRule(s.to_string()))
    }
}

fn rule_fires(doc: &PaperDoc, ref_id: &str, rule: RuleKind) -> bool {
    doc.mentions_of(ref_id).any(|m| match rule {
        RuleKind::Table => m.in_table,
        RuleKind::Section(c) => doc.section_category(m) == Some(c),
    })
}

/// Labels every reference of `doc`: baseline iff it has a mention matching the rule.
pub fn section_rule_classifier(doc: &PaperDoc, rule: RuleKind) -> Vec<(String, Label)> {
    doc.references
        .iter()
        .map(|r| {
            let label = if rule_fires(doc, &r.ref_id, rule) {
                Label::Baseline
            } else {
                Label::NonBaseline
            };
            (r.ref_id.clone(), label)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleScore {
    pub rule: RuleKind,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
}

/// Scores a rule against gold labels; unlabeled references are skipped.
pub fn rule_score(docs: &[PaperDoc], rule: RuleKind) -> RuleScore {
    let confusion = docs
        .iter()
        .map(|doc| {
            let mut c = Confusion::default();
            for (r, (_, pred)) in doc.references.iter().zip(section_rule_classifier(doc, rule)) {
                match (r.label, pred) {
                    (Label::Baseline, Label::Baseline) => c.tp += 1,
                    (Label::NonBaseline, Label::Baseline) => c.fp += 1,
                    (Label::Baseline, _) => c.fn_ += 1,
                    (Label::NonBaseline, _) => c.tn += 1,
                    (Label::Unlabeled, _) => {}
                }
            }
            c
        })
        .fold(Confusion::default(), |a, b| a + b);
    RuleScore {
        rule,
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
    }
}

/// All six rules, in the canonical order.
pub fn rule_table(docs: &[PaperDoc]) -> Vec<RuleScore> {
    RuleKind::ALL.iter().map(|&r| rule_score(docs, r)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SectionRow {
    pub category: Option<SectionCategory>,
    pub baseline_total: u64,
    pub baseline_exclusive: u64,
    pub non_baseline_total: u64,
    pub non_baseline_exclusive: u64,
}

/// Per category: labeled references with at least one mention there
/// (`total`) and those whose mentions all sit in that one category
/// (`exclusive`). Table mentions count under their enclosing section.
pub fn section_distribution(docs: &[PaperDoc]) -> Vec<SectionRow> {
    let mut rows: Vec<SectionRow> = SectionCategory::ALL
        .iter()
        .map(|&c| SectionRow {
            category: Some(c),
            ..Default::default()
        })
        .collect();
    for doc in docs {
        for r in doc.references.iter().filter(|r| r.label.is_labeled()) {
            let present: BTreeSet<usize> = doc
                .mentions_of(&r.ref_id)
                .filter_map(|m| doc.section_category(m))
                .map(|c| c.index())
                .collect();
            let exclusive = present.len() == 1;
            for &i in &present {
                let row = &mut rows[i];
                if r.label == Label::Baseline {
                    row.baseline_total += 1;
                    row.baseline_exclusive += exclusive as u64;
                } else {
                    row.non_baseline_total += 1;
                    row.non_baseline_exclusive += exclusive as u64;
                }
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct YearBucket {
    pub lo: i32,
    pub hi: i32,
}

impl YearBucket {
    pub fn contains(&self, year: i32) -> bool {
        (self.lo..=self.hi).contains(&year)
    }
}

impl fmt::Display for YearBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

pub fn default_year_buckets() -> Vec<YearBucket> {
    [(1980, 2000), (2001, 2005), (2006, 2010), (2011, 2015)]
        .into_iter()
        .map(|(lo, hi)| YearBucket { lo, hi })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BucketStats {
    pub bucket: YearBucket,
    pub papers: u64,
    pub references: u64,
    pub baselines: u64,
}

impl BucketStats {
    pub fn mean_references(&self) -> String {
        format_ratio_2dp(self.references, self.papers)
    }

    pub fn mean_baselines(&self) -> String {
        format_ratio_2dp(self.baselines, self.papers)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub buckets: Vec<BucketStats>,
    /// Papers whose year falls in no bucket.
    pub excluded: Vec<String>,
}

/// `num/den` rounded half-up to two decimals with exact integer arithmetic;
/// `NA` when `den` is zero.
pub fn format_ratio_2dp(num: u64, den: u64) -> String {
    if den == 0 {
        return "NA".to_string();
    }
    let scaled = (num as u128 * 200 + den as u128) / (2 * den as u128);
    format!("{}.{:02}", scaled / 100, scaled % 100)
}

/// Half-up rendering of an arbitrary real at two decimals.
pub fn format_2dp(x: f64) -> String {
    let scaled = (x.abs() * 100.0 + 0.5 + 1e-9).floor();
    let sign = if x < 0.0 && scaled > 0.0 { "-" } else { "" };
    format!("{sign}{}.{:02}", scaled as u64 / 100, scaled as u64 % 100)
}

pub fn corpus_stats(docs: &[PaperDoc], buckets: &[YearBucket]) -> Result<CorpusStats, HeuristicsError> {
    for (i, a) in buckets.iter().enumerate() {
        if a.lo > a.hi {
            return Err(HeuristicsError::InvalidBucket((a.lo, a.hi)));
        }
        for b in &buckets[i + 1..] {
            if a.lo <= b.hi && b.lo <= a.hi {
                return Err(HeuristicsError::OverlappingBuckets((a.lo, a.hi), (b.lo, b.hi)));
            }
        }
    }
    let mut stats: Vec<BucketStats> = buckets
        .iter()
        .map(|&bucket| BucketStats {
            bucket,
            papers: 0,
            references: 0,
            baselines: 0,
        })
        .collect();
    let mut excluded = Vec::new();
    for doc in docs {
        match stats.iter_mut().find(|s| s.bucket.contains(doc.year)) {
            Some(s) => {
                s.papers += 1;
                s.references += doc.references.len() as u64;
                s.baselines += doc.references.iter().filter(|r| r.label == Label::Baseline).count() as u64;
            }
            None => excluded.push(doc.paper_id.clone()),
        }
    }
    Ok(CorpusStats {
        buckets: stats,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub papers: u64,
    pub baselines: u64,
    pub non_baselines: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub rows: Vec<SummaryRow>,
    /// Agreement over references labeled by both annotators, when any.
    pub kappa: Option<f64>,
}

fn summarize<'a>(name: &str, labels: impl Iterator<Item = (&'a str, Label)>) -> SummaryRow {
    let mut papers = BTreeSet::new();
    let (mut baselines, mut non_baselines) = (0, 0);
    for (paper, label) in labels {
        papers.insert(paper);
        match label {
            Label::Baseline => baselines += 1,
            Label::NonBaseline => non_baselines += 1,
            Label::Unlabeled => {}
        }
    }
    SummaryRow {
        name: name.to_string(),
        papers: papers.len() as u64,
        baselines,
        non_baselines,
    }
}

/// Annotation summary of the labeled corpus. With two annotator files the
/// table adds one row per annotator, a row for papers both annotated
/// (counted with the first annotator's labels) and the union, plus kappa
/// over the doubly-labeled references.
pub fn dataset_summary(
    docs: &[PaperDoc],
    annotators: Option<(&[Annotation], &[Annotation])>,
) -> Result<DatasetSummary, HeuristicsError> {
    let corpus_row = summarize(
        "corpus",
        docs.iter()
            .filter(|d| d.is_annotated())
            .flat_map(|d| d.references.iter().map(move |r| (d.paper_id.as_str(), r.label))),
    );
    let Some((a1, a2)) = annotators else {
        return Ok(DatasetSummary {
            rows: vec![corpus_row],
            kappa: None,
        });
    };
    let papers2: BTreeSet<&str> = a2.iter().map(|a| a.paper_id.as_str()).collect();
    let papers1: BTreeSet<&str> = a1.iter().map(|a| a.paper_id.as_str()).collect();
    let row1 = summarize("annotator_1", a1.iter().map(|a| (a.paper_id.as_str(), a.label)));
    let row2 = summarize("annotator_2", a2.iter().map(|a| (a.paper_id.as_str(), a.label)));
    let common = summarize(
        "common",
        a1.iter()
            .filter(|a| papers2.contains(a.paper_id.as_str()))
            .map(|a| (a.paper_id.as_str(), a.label)),
    );
    let unique = summarize(
        "unique",
        a1.iter()
            .chain(a2.iter().filter(|a| !papers1.contains(a.paper_id.as_str())))
            .map(|a| (a.paper_id.as_str(), a.label)),
    );
    let second: BTreeMap<(&str, &str), Label> = a2
        .iter()
        .map(|a| ((a.paper_id.as_str(), a.ref_id.as_str()), a.label))
        .collect();
    let (xs, ys): (Vec<Label>, Vec<Label>) = a1
        .iter()
        .filter_map(|a| {
            second
                .get(&(a.paper_id.as_str(), a.ref_id.as_str()))
                .map(|&b| (a.label, b))
        })
        .unzip();
    let kappa = if xs.is_empty() {
        None
    } else {
        Some(cohens_kappa(&xs, &ys)?)
    };
    Ok(DatasetSummary {
        rows: vec![corpus_row, row1, row2, common, unique],
        kappa,
    })
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, HeuristicsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn pretty(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out += &line(rule.iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

/// A rendered statistics table: CSV plus an aligned text version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub csv: String,
    pub text: String,
}

fn render(header: &[&str], rows: Vec<Vec<String>>) -> Result<Rendered, HeuristicsError> {
    let text = pretty(header, &rows);
    Ok(Rendered {
        csv: csv_string(header, rows)?,
        text,
    })
}

pub fn render_summary(summary: &DatasetSummary) -> Result<Rendered, HeuristicsError> {
    let rows = summary
        .rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.papers.to_string(),
                r.baselines.to_string(),
                r.non_baselines.to_string(),
            ]
        })
        .collect();
    let mut out = render(&["row", "papers", "baselines", "non_baselines"], rows)?;
    if let Some(k) = summary.kappa {
        out.text += &format!("cohen's kappa: {}\n", format_3dp(k));
    }
    Ok(out)
}

fn format_3dp(x: f64) -> String {
    format!("{:.3}", x)
}

pub fn render_corpus_stats(stats: &CorpusStats) -> Result<Rendered, HeuristicsError> {
    let rows = stats
        .buckets
        .iter()
        .map(|s| {
            vec![
                s.bucket.to_string(),
                s.papers.to_string(),
                s.references.to_string(),
                s.baselines.to_string(),
                s.mean_references(),
                s.mean_baselines(),
            ]
        })
        .collect();
    let mut out = render(
        &[
            "years",
            "papers",
            "references",
            "baselines",
            "mean_references",
            "mean_baselines",
        ],
        rows,
    )?;
    if !stats.excluded.is_empty() {
        out.text += &format!("excluded (outside buckets): {}\n", stats.excluded.join(", "));
    }
    Ok(out)
}

pub fn render_section_distribution(rows: &[SectionRow]) -> Result<Rendered, HeuristicsError> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.category.map_or("", |c| c.as_str()).to_string(),
                r.baseline_total.to_string(),
                r.baseline_exclusive.to_string(),
                r.non_baseline_total.to_string(),
                r.non_baseline_exclusive.to_string(),
            ]
        })
        .collect();
    render(
        &[
            "section",
            "baseline_total",
            "baseline_exclusive",
            "non_baseline_total",
            "non_baseline_exclusive",
        ],
        rows,
    )
}

pub fn render_rule_table(scores: &[RuleScore]) -> Result<Rendered, HeuristicsError> {
    let rows = scores
        .iter()
        .map(|s| {
            vec![
                s.rule.name().to_string(),
                s.confusion.tp.to_string(),
                s.confusion.fp.to_string(),
                s.confusion.fn_.to_string(),
                format_ratio_2dp(s.confusion.tp, s.confusion.tp + s.confusion.fp),
                format_ratio_2dp(s.confusion.tp, s.confusion.tp + s.confusion.fn_),
            ]
        })
        .collect();
    render(&["rule", "tp", "fp", "fn", "precision", "recall"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{tiny_doc, toks};
    use crate::corpus::{CitationMention, Reference, Section};

    fn reference(id: &str, label: Label) -> Reference {
        Reference {
            ref_id: id.into(),
            raw_string: String::new(),
            cited_title: format!("title {id}"),
            cited_year: None,
            citation_count: None,
            label,
        }
    }

    fn mention(id: &str, section: usize, in_table: bool) -> CitationMention {
        CitationMention {
            ref_id: id.into(),
            section_index: section,
            paragraph_index: 0,
            sentence_index: 0,
            token_offset: 0,
            in_table,
        }
    }

    /// Sections: introduction, methods_results; refs A (intro only, baseline),
    /// B (intro + methods, baseline), C (methods, table, non-baseline), D (none).
    fn doc() -> PaperDoc {
        let section = |heading: &str, category| Section {
            heading: heading.into(),
            category,
            paragraphs: vec![vec![toks("x y z")]],
            table_regions: vec![],
        };
        let mut methods = section("Experiments", SectionCategory::MethodsResults);
        methods.table_regions = vec![(0, 0)];
        PaperDoc {
            paper_id: "H1".into(),
            title: toks("t"),
            abstract_: toks("a"),
            venue: "v".into(),
            year: 2003,
            sections: vec![section("Introduction", SectionCategory::Introduction), methods],
            references: vec![
                reference("A", Label::Baseline),
                reference("B", Label::Baseline),
                reference("C", Label::NonBaseline),
                reference("D", Label::NonBaseline),
            ],
            mentions: vec![
                mention("A", 0, false),
                mention("B", 0, false),
                mention("B", 1, true),
                mention("C", 1, true),
            ],
            split_tag: Default::default(),
        }
    }

    #[test]
    fn fixture_is_valid() {
        doc().validate().unwrap();
    }

    #[test]
    fn rules_fire_on_mentions() {
        let got = section_rule_classifier(&doc(), RuleKind::Section(SectionCategory::MethodsResults));
        let baselines: Vec<_> = got
            .iter()
            .filter(|(_, l)| *l == Label::Baseline)
            .map(|(r, _)| r.as_str())
            .collect();
        assert_eq!(baselines, ["B", "C"]);
    }

    #[test]
    fn table_rule_without_tables_is_all_negative() {
        let mut d = doc();
        for m in &mut d.mentions {
            m.in_table = false;
        }
        d.sections[1].table_regions.clear();
        assert!(section_rule_classifier(&d, RuleKind::Table)
            .iter()
            .all(|(_, l)| *l == Label::NonBaseline));
    }

    #[test]
    fn rule_scores() {
        let s = rule_score(&[doc()], RuleKind::Section(SectionCategory::MethodsResults));
        assert_eq!(
            s.confusion,
            Confusion {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        assert_eq!((s.precision, s.recall), (0.5, 0.5));
        let s = rule_score(&[doc()], RuleKind::Section(SectionCategory::Introduction));
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = rule_score(&[doc()], RuleKind::Section(SectionCategory::Conclusion));
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    #[test]
    fn distribution_total_and_exclusive() {
        let rows = section_distribution(&[doc()]);
        let intro = rows[SectionCategory::Introduction.index()];
        assert_eq!((intro.baseline_total, intro.baseline_exclusive), (2, 1));
        let methods = rows[SectionCategory::MethodsResults.index()];
        assert_eq!((methods.baseline_total, methods.baseline_exclusive), (1, 0));
        assert_eq!((methods.non_baseline_total, methods.non_baseline_exclusive), (1, 1));
        for r in &rows {
            assert!(r.baseline_exclusive <= r.baseline_total);
            assert!(r.non_baseline_exclusive <= r.non_baseline_total);
        }
    }

    #[test]
    fn stats_means_and_exclusion() {
        let mut d = doc();
        d.references = (0..10)
            .map(|i| {
                reference(
                    &format!("R{i}"),
                    if i < 2 { Label::Baseline } else { Label::NonBaseline },
                )
            })
            .collect();
        d.mentions.clear();
        let mut late = tiny_doc();
        late.year = 2019;
        let stats = corpus_stats(&[d, late], &default_year_buckets()).unwrap();
        let b = stats.buckets[1];
        assert_eq!((b.papers, b.references, b.baselines), (1, 10, 2));
        assert_eq!(
            (b.mean_references(), b.mean_baselines()),
            ("10.00".to_string(), "2.00".to_string())
        );
        assert_eq!(stats.excluded, vec!["P1".to_string()]);
        assert_eq!(stats.buckets[0].mean_references(), "NA");
    }

    #[test]
    fn overlapping_buckets_rejected() {
        let b = [YearBucket { lo: 1990, hi: 2000 }, YearBucket { lo: 2000, hi: 2005 }];
        assert!(matches!(
            corpus_stats(&[], &b),
            Err(HeuristicsError::OverlappingBuckets(..))
        ));
        assert!(corpus_stats(&[], &[YearBucket { lo: 3, hi: 1 }]).is_err());
    }

    #[test]
    fn half_up_rendering() {
        assert_eq!(format_ratio_2dp(1, 8), "0.13");
        assert_eq!(format_ratio_2dp(2339, 125), "18.71");
        assert_eq!(format_ratio_2dp(3096, 1182), "2.62");
        assert_eq!(format_ratio_2dp(0, 5), "0.00");
        assert_eq!(format_2dp(0.825), "0.83");
        assert_eq!(format_2dp(0.775), "0.78");
        assert_eq!(format_2dp(-0.125), "-0.13");
    }

    #[test]
    fn summary_with_annotators() {
        let ann = |p: &str, r: &str, l| Annotation {
            paper_id: p.into(),
            ref_id: r.into(),
            label: l,
        };
        let a1 = vec![
            ann("P1", "R1", Label::Baseline),
            ann("P1", "R2", Label::NonBaseline),
            ann("P2", "R1", Label::NonBaseline),
        ];
        let a2 = vec![
            ann("P2", "R1", Label::NonBaseline),
            ann("P3", "R1", Label::Baseline),
            ann("P3", "R2", Label::Baseline),
        ];
        let s = dataset_summary(&[tiny_doc()], Some((&a1, &a2))).unwrap();
        let counts: Vec<_> = s
            .rows
            .iter()
            .map(|r| (r.name.as_str(), r.papers, r.baselines, r.non_baselines))
            .collect();
        assert_eq!(
            counts,
            vec![
                ("corpus", 1, 1, 0),
                ("annotator_1", 2, 1, 2),
                ("annotator_2", 2, 2, 1),
                ("common", 1, 0, 1),
                ("unique", 3, 3, 2),
            ]
        );
        assert_eq!(s.kappa, Some(1.0));
        let text = render_summary(&s).unwrap().text;
        assert!(text.contains("cohen's kappa: 1.000"));
    }

    #[test]
    fn csv_rendering() {
        let r = render_rule_table(&rule_table(&[doc()])).unwrap();
        let first_lines: Vec<_> = r.csv.lines().take(2).collect();
        assert_eq!(
            first_lines,
            ["rule,tp,fp,fn,precision,recall", "introduction,2,0,0,1.00,1.00"]
        );
        assert_eq!(r.csv.lines().count(), 7);
        assert!(r.text.starts_with("rule"));
    }

    #[test]
    fn rule_names_round_trip() {
        for r in RuleKind::ALL {
            assert_eq!(r.name().parse::<RuleKind>().unwrap(), r);
        }
        assert!("tables".parse::<RuleKind>().is_err());
    }
}
