//! Seeded generators for labeled toy corpora.
//!
//! Two shapes are provided: [`MentionProfile`]-driven corpora whose
//! per-section mention rates can mimic a real annotated collection, and a
//! separable corpus in which the table flag alone decides the label.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CitationMention, Label, PaperDoc, Reference, Section, SectionCategory, SplitTag};

const FILLER: &[&str] = &[
    "the",
    "we",
    "a",
    "of",
    "data",
    "word",
    "sentence",
    "parser",
    "features",
    "training",
    "on",
    "for",
    "in",
    "this",
    "task",
    "language",
    "corpus",
    "annotation",
    "graph",
    "tree",
    "is",
    "with",
    "are",
    "system",
    "semantic",
    "lexical",
    "our",
    "these",
    "from",
    "by",
    "translation",
    "alignment",
    "tagging",
    "that",
    "which",
    "as",
    "an",
    "be",
    "using",
    "each",
];

const CUES: &[&str] = &[
    "outperforms",
    "baseline",
    "compared",
    "results",
    "accuracy",
    "higher",
    "best",
    "reported",
    "state-of-the-art",
    "F-score",
    "significantly",
    "evaluation",
];

/// Per-class probability that a reference is mentioned in each section
/// category, plus the probability of a table mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionProfile {
    /// Indexed by [`SectionCategory::index`].
    pub baseline_sections: [f64; 5],
    pub baseline_table: f64,
    pub non_baseline_sections: [f64; 5],
    pub non_baseline_table: f64,
    /// Probability that a cue word is placed next to a baseline mention.
    pub baseline_cue_rate: f64,
    pub non_baseline_cue_rate: f64,
}

impl MentionProfile {
    /// Rates reproducing the section/table recall and precision pattern of a
    /// large annotated ACL collection at a baseline prior of about 9%.
    pub fn acl_like() -> Self {
        MentionProfile {
            baseline_sections: [0.42, 0.35, 0.734, 0.04, 0.35],
            baseline_table: 0.18,
            non_baseline_sections: [0.275, 0.308, 0.235, 0.018, 0.277],
            non_baseline_table: 0.0068,
            baseline_cue_rate: 0.6,
            non_baseline_cue_rate: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub papers: usize,
    pub refs_per_paper: (usize, usize),
    pub baseline_rate: f64,
    pub years: (i32, i32),
    pub profile: MentionProfile,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            papers: 20,
            refs_per_paper: (12, 30),
            baseline_rate: 0.089,
            years: (1980, 2015),
            profile: MentionProfile::acl_like(),
            seed: 2021,
        }
    }
}

struct Placement {
    ref_id: String,
    category: SectionCategory,
    table: bool,
    cue: bool,
}

fn filler(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| FILLER.choose(rng).expect("nonempty").to_string())
        .collect()
}

fn citation_token(ref_id: &str) -> String {
    format!("[{ref_id}]")
}

const HEADINGS: [(&str, SectionCategory); 6] = [
    ("1 Introduction", SectionCategory::Introduction),
    ("2 Related Work", SectionCategory::Related),
    ("3 Our Approach", SectionCategory::MethodsResults),
    ("4 Experiments and Results", SectionCategory::MethodsResults),
    ("5 Conclusion and Future Work", SectionCategory::Conclusion),
    ("Acknowledgements", SectionCategory::Other),
];

fn section_slot(category: SectionCategory, rng: &mut ChaCha8Rng) -> usize {
    match category {
        SectionCategory::Introduction => 0,
        SectionCategory::Related => 1,
        SectionCategory::MethodsResults => {
            if rng.random_bool(0.5) {
                2
            } else {
                3
            }
        }
        SectionCategory::Conclusion => 4,
        SectionCategory::Other => 5,
    }
}

/// Assembles one document from reference placements.
fn build_doc(
    paper_id: String,
    year: i32,
    references: Vec<Reference>,
    placements: Vec<Placement>,
    rng: &mut ChaCha8Rng,
) -> PaperDoc {
    let mut prose: Vec<Vec<&Placement>> = vec![Vec::new(); HEADINGS.len()];
    let mut table_rows: Vec<&Placement> = Vec::new();
    for p in &placements {
        if p.table {
            table_rows.push(p);
        } else {
            let slot = section_slot(p.category, rng);
            prose[slot].push(p);
        }
    }

    let mut sections = Vec::new();
    let mut mentions = Vec::new();
    for (si, (heading, category)) in HEADINGS.iter().enumerate() {
        let mut paragraphs: Vec<Vec<Vec<String>>> = Vec::new();
        let items = &prose[si];
        let n_paragraphs = 1 + items.len() / 4;
        for _ in 0..n_paragraphs {
            let n_sentences = rng.random_range(3..=12);
            paragraphs.push(
                (0..n_sentences)
                    .map(|_| {
                        let len = rng.random_range(6..=24);
                        filler(rng, len)
                    })
                    .collect(),
            );
        }
        let mut section_mentions = Vec::new();
        for p in items.iter() {
            let pi = rng.random_range(0..paragraphs.len());
            let sj = rng.random_range(0..paragraphs[pi].len());
            let sentence = &mut paragraphs[pi][sj];
            let offset = rng.random_range(0..=sentence.len());
            sentence.insert(offset, citation_token(&p.ref_id));
            if p.cue {
                let cue = CUES.choose(rng).expect("nonempty").to_string();
                sentence.insert(offset, cue);
            }
            section_mentions.push((p.ref_id.clone(), pi, sj, sentence.len()));
        }
        // Offsets are resolved after all insertions so later inserts cannot shift them.
        for (ref_id, pi, sj, _) in section_mentions {
            let tok = citation_token(&ref_id);
            let positions: Vec<usize> = paragraphs[pi][sj]
                .iter()
                .enumerate()
                .filter(|(_, t)| **t == tok)
                .map(|(i, _)| i)
                .collect();
            for offset in positions {
                let m = CitationMention {
                    ref_id: ref_id.clone(),
                    section_index: si,
                    paragraph_index: pi,
                    sentence_index: sj,
                    token_offset: offset,
                    in_table: false,
                };
                if !mentions.contains(&m) {
                    mentions.push(m);
                }
            }
        }
        let mut table_regions = Vec::new();
        if si == 3 && !table_rows.is_empty() {
            let pi = paragraphs.len();
            let mut rows = vec![vec![
                "Method".to_string(),
                "|".into(),
                "P".into(),
                "|".into(),
                "F1".into(),
            ]];
            table_regions.push((pi, 0));
            for p in &table_rows {
                let sj = rows.len();
                rows.push(vec![
                    citation_token(&p.ref_id),
                    "|".into(),
                    format!("{:.1}", rng.random_range(50.0..95.0)),
                    "|".into(),
                    format!("{:.1}", rng.random_range(50.0..95.0)),
                ]);
                table_regions.push((pi, sj));
                mentions.push(CitationMention {
                    ref_id: p.ref_id.clone(),
                    section_index: si,
                    paragraph_index: pi,
                    sentence_index: sj,
                    token_offset: 0,
                    in_table: true,
                });
            }
            paragraphs.push(rows);
        }
        sections.push(Section {
            heading: heading.to_string(),
            category: *category,
            paragraphs,
            table_regions,
        });
    }
    mentions.sort_by(|a, b| {
        (a.section_index, a.paragraph_index, a.sentence_index, a.token_offset).cmp(&(
            b.section_index,
            b.paragraph_index,
            b.sentence_index,
            b.token_offset,
        ))
    });

    let title_len = rng.random_range(4..=10);
    let abstract_len = rng.random_range(30..=60);
    PaperDoc {
        paper_id,
        title: filler(rng, title_len),
        abstract_: filler(rng, abstract_len),
        venue: "Proceedings of the Annual Meeting of the ACL".into(),
        year,
        sections,
        references,
        mentions,
        split_tag: SplitTag::Unassigned,
    }
}

fn make_reference(rng: &mut ChaCha8Rng, ref_id: String, label: Label) -> Reference {
    let title_len = rng.random_range(3..=8);
    let title = filler(rng, title_len).join(" ");
    let year = rng.random_range(1975..=2015);
    let citation_count = if rng.random_bool(0.8) {
        Some(rng.random_range(0..2000))
    } else {
        None
    };
    Reference {
        raw_string: format!("Author et al. {year}. {title}."),
        ref_id,
        cited_title: title,
        cited_year: Some(year),
        citation_count,
        label,
    }
}

/// Generates a labeled corpus following `config.profile`.
pub fn generate(config: &SynthConfig) -> Vec<PaperDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let profile = &config.profile;
    (0..config.papers)
        .map(|pi| {
            let n_refs = rng.random_range(config.refs_per_paper.0..=config.refs_per_paper.1);
            let mut references = Vec::with_capacity(n_refs);
            let mut placements = Vec::new();
            for ri in 0..n_refs {
                let label = if rng.random_bool(config.baseline_rate) {
                    Label::Baseline
                } else {
                    Label::NonBaseline
                };
                let ref_id = format!("R{ri}");
                let (sections, table, cue) = match label {
                    Label::Baseline => (
                        profile.baseline_sections,
                        profile.baseline_table,
                        profile.baseline_cue_rate,
                    ),
                    _ => (
                        profile.non_baseline_sections,
                        profile.non_baseline_table,
                        profile.non_baseline_cue_rate,
                    ),
                };
                for category in SectionCategory::ALL {
                    if rng.random_bool(sections[category.index()]) {
                        placements.push(Placement {
                            ref_id: ref_id.clone(),
                            category,
                            table: false,
                            cue: rng.random_bool(cue),
                        });
                    }
                }
                if rng.random_bool(table) {
                    placements.push(Placement {
                        ref_id: ref_id.clone(),
                        category: SectionCategory::MethodsResults,
                        table: true,
                        cue: false,
                    });
                }
                references.push(make_reference(&mut rng, ref_id, label));
            }
            placements.shuffle(&mut rng);
            let year = rng.random_range(config.years.0..=config.years.1);
            build_doc(format!("S{:04}", pi), year, references, placements, &mut rng)
        })
        .collect()
}

/// A corpus of `papers × refs_per_paper` references in which a reference is
/// a baseline exactly when it appears in a results table.
///
/// Every reference also has one prose mention in a methods/results section
/// with class-independent context, so no other signal separates the classes.
pub fn separable(papers: usize, refs_per_paper: usize, seed: u64) -> Vec<PaperDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..papers)
        .map(|pi| {
            let mut references = Vec::new();
            let mut placements = Vec::new();
            for ri in 0..refs_per_paper {
                let label = if ri % 2 == 0 {
                    Label::Baseline
                } else {
                    Label::NonBaseline
                };
                let ref_id = format!("R{ri}");
                placements.push(Placement {
                    ref_id: ref_id.clone(),
                    category: SectionCategory::MethodsResults,
                    table: false,
                    cue: rng.random_bool(0.3),
                });
                if label == Label::Baseline {
                    placements.push(Placement {
                        ref_id: ref_id.clone(),
                        category: SectionCategory::MethodsResults,
                        table: true,
                        cue: false,
                    });
                }
                references.push(make_reference(&mut rng, ref_id, label));
            }
            placements.shuffle(&mut rng);
            let year = rng.random_range(2000..=2015);
            build_doc(format!("T{:04}", pi), year, references, placements, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_corpus;

    #[test]
    fn generated_corpora_validate() {
        let docs = generate(&SynthConfig::default());
        assert_eq!(docs.len(), 20);
        validate_corpus(&docs).unwrap();
        assert!(docs.iter().all(|d| d.is_annotated()));
        validate_corpus(&separable(4, 8, 3)).unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            papers: 5,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
    }

    #[test]
    fn separable_table_flag_decides_label() {
        for doc in separable(4, 8, 11) {
            for r in &doc.references {
                let in_table = doc.mentions_of(&r.ref_id).any(|m| m.in_table);
                assert_eq!(in_table, r.label == Label::Baseline);
                assert!(doc.mentions_of(&r.ref_id).any(|m| !m.in_table));
            }
        }
    }
}
