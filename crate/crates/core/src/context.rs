//! Fixed-size citation context windows.
//!
//! A window holds up to `rows` sentences from the paragraph containing the
//! mention, each right-padded or truncated to `cols` tokens. The citation
//! sentence sits 4 rows from the top when the paragraph allows it; near a
//! paragraph edge the window shifts so that it stays full. Windows never
//! cross paragraph boundaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CitationMention, PaperDoc, SectionCategory};

/// Reserved padding token. Never matched as a cue word.
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("paper `{paper_id}`: mention of `{ref_id}` addresses no sentence")]
    MissingSentence { paper_id: String, ref_id: String },
    #[error("paper `{paper_id}`: mention of `{ref_id}` has token_offset {offset} beyond sentence length {len}")]
    OffsetOutOfRange {
        paper_id: String,
        ref_id: String,
        offset: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowShape {
    pub rows: usize,
    pub cols: usize,
}

impl Default for WindowShape {
    fn default() -> Self {
        WindowShape { rows: 10, cols: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    /// `rows × cols` tokens; padding positions hold [`PAD_TOKEN`].
    pub tokens: Vec<Vec<String>>,
    /// `true` marks a real token.
    pub mask: Vec<Vec<bool>>,
    pub citation_row: usize,
    /// Paragraph-relative sentence index of each real row.
    pub source_sentences: Vec<Option<usize>>,
    /// Column of the mention inside the citation row (clamped to the last
    /// kept token when the mention falls past the truncation point).
    pub citation_col: usize,
    /// Set when the mention sits in a table paragraph with no prose, in
    /// which case only the citation row is filled.
    pub table_only: bool,
}

impl ContextWindow {
    pub fn shape(&self) -> WindowShape {
        WindowShape {
            rows: self.tokens.len(),
            cols: self.tokens.first().map_or(0, Vec::len),
        }
    }

    pub fn row_is_masked(&self, row: usize) -> bool {
        !self.mask[row].iter().any(|&m| m)
    }

    pub fn real_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tokens.len()).filter(|&r| !self.row_is_masked(r))
    }

    /// Real tokens in row-major order.
    pub fn flattened(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .zip(&self.mask)
            .flat_map(|(row, mask)| row.iter().zip(mask).filter(|(_, &m)| m).map(|(t, _)| t.as_str()))
            .collect()
    }

    /// Index of the mention within [`ContextWindow::flattened`].
    pub fn mention_position(&self) -> usize {
        let before: usize = (0..self.citation_row)
            .map(|r| self.mask[r].iter().filter(|&&m| m).count())
            .sum();
        before + self.citation_col
    }

    /// Rows of tab-separated tokens for inspection dumps. The first field
    /// is `*` on the citation row and empty elsewhere.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (r, row) in self.tokens.iter().enumerate() {
            out.push_str(if r == self.citation_row { "*\t" } else { "\t" });
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

fn checked_sentence<'a>(doc: &'a PaperDoc, mention: &CitationMention) -> Result<&'a Vec<String>, ContextError> {
    let sentence = doc.sentence(mention).ok_or_else(|| ContextError::MissingSentence {
        paper_id: doc.paper_id.clone(),
        ref_id: mention.ref_id.clone(),
    })?;
    if mention.token_offset >= sentence.len() {
        return Err(ContextError::OffsetOutOfRange {
            paper_id: doc.paper_id.clone(),
            ref_id: mention.ref_id.clone(),
            offset: mention.token_offset,
            len: sentence.len(),
        });
    }
    Ok(sentence)
}

/// The sentence containing the mention, unpadded.
pub fn citation_sentence(doc: &PaperDoc, mention: &CitationMention) -> Result<Vec<String>, ContextError> {
    checked_sentence(doc, mention).cloned()
}

/// Rank of a section category when choosing which mention represents a
/// multiply-cited reference; lower is preferred.
pub fn mention_priority(category: SectionCategory) -> u8 {
    match category {
        SectionCategory::MethodsResults => 0,
        SectionCategory::Other => 1,
        SectionCategory::Related => 2,
        SectionCategory::Introduction => 3,
        SectionCategory::Conclusion => 4,
    }
}

/// The mention used to classify a reference: the one in the most
/// methods/results-like section, earliest in document order on ties.
pub fn representative_mention<'a>(doc: &'a PaperDoc, ref_id: &str) -> Option<&'a CitationMention> {
    doc.mentions.iter().filter(|m| m.ref_id == ref_id).min_by_key(|m| {
        let category = doc.section_category(m).unwrap_or(SectionCategory::Other);
        (
            mention_priority(category),
            m.section_index,
            m.paragraph_index,
            m.sentence_index,
            m.token_offset,
        )
    })
}

/// First sentence index of a `rows`-sentence window around `center` in a
/// paragraph of `len` sentences.
pub fn window_start(len: usize, center: usize, rows: usize) -> usize {
    let before = (rows.saturating_sub(1)) / 2;
    if len <= rows {
        0
    } else {
        center.saturating_sub(before).min(len - rows)
    }
}

pub fn extract_window(doc: &PaperDoc, mention: &CitationMention) -> Result<ContextWindow, ContextError> {
    extract_window_with(doc, mention, WindowShape::default())
}

pub fn extract_window_with(
    doc: &PaperDoc,
    mention: &CitationMention,
    shape: WindowShape,
) -> Result<ContextWindow, ContextError> {
    checked_sentence(doc, mention)?;
    let section = &doc.sections[mention.section_index];
    let paragraph = &section.paragraphs[mention.paragraph_index];
    let table_only = mention.in_table && (0..paragraph.len()).all(|s| section.is_table(mention.paragraph_index, s));

    let (start, len) = if table_only {
        (mention.sentence_index, 1)
    } else {
        let start = window_start(paragraph.len(), mention.sentence_index, shape.rows);
        (start, paragraph.len().min(shape.rows))
    };

    let mut tokens = vec![vec![PAD_TOKEN.to_string(); shape.cols]; shape.rows];
    let mut mask = vec![vec![false; shape.cols]; shape.rows];
    let mut source_sentences = vec![None; shape.rows];
    for row in 0..len {
        let si = start + row;
        for (c, tok) in paragraph[si].iter().take(shape.cols).enumerate() {
            tokens[row][c] = tok.clone();
            mask[row][c] = true;
        }
        source_sentences[row] = Some(si);
    }
    let citation_row = mention.sentence_index - start;
    let kept = paragraph[mention.sentence_index].len().min(shape.cols);
    Ok(ContextWindow {
        tokens,
        mask,
        citation_row,
        source_sentences,
        citation_col: mention.token_offset.min(kept - 1),
        table_only,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Reference, Section, SectionCategory, SplitTag};

    fn indexed_sentence(p: usize, s: usize, len: usize) -> Vec<String> {
        (0..len).map(|t| format!("p{p}s{s}t{t}")).collect()
    }

    fn doc_with(paragraph_lens: &[Vec<usize>], tables: Vec<(usize, usize)>) -> PaperDoc {
        let paragraphs = paragraph_lens
            .iter()
            .enumerate()
            .map(|(p, sents)| {
                sents
                    .iter()
                    .enumerate()
                    .map(|(s, &n)| indexed_sentence(p, s, n))
                    .collect()
            })
            .collect();
        PaperDoc {
            paper_id: "W".into(),
            title: vec!["t".into()],
            abstract_: vec!["a".into()],
            venue: "v".into(),
            year: 2000,
            sections: vec![Section {
                heading: "Experiments".into(),
                category: SectionCategory::MethodsResults,
                paragraphs,
                table_regions: tables,
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

    fn mention(p: usize, s: usize, offset: usize, in_table: bool) -> CitationMention {
        CitationMention {
            ref_id: "R".into(),
            section_index: 0,
            paragraph_index: p,
            sentence_index: s,
            token_offset: offset,
            in_table,
        }
    }

    #[test]
    fn short_paragraph_padded() {
        let doc = doc_with(&[vec![5, 6, 7]], vec![]);
        let w = extract_window(&doc, &mention(0, 1, 2, false)).unwrap();
        assert_eq!(w.shape(), WindowShape { rows: 10, cols: 50 });
        assert_eq!(w.citation_row, 1);
        for r in 0..3 {
            assert!(!w.row_is_masked(r));
        }
        for r in 3..10 {
            assert!(w.row_is_masked(r));
            assert!(w.tokens[r].iter().all(|t| t == PAD_TOKEN));
        }
        assert_eq!(w.mask[0].iter().filter(|&&m| m).count(), 5);
    }

    #[test]
    fn tsv_marks_citation_row_in_own_field() {
        let doc = doc_with(&[vec![2, 3]], vec![]);
        let w = extract_window_with(&doc, &mention(0, 1, 0, false), WindowShape { rows: 2, cols: 3 }).unwrap();
        assert_eq!(w.to_tsv(), "\tp0s0t0\tp0s0t1\t<pad>\n*\tp0s1t0\tp0s1t1\tp0s1t2\n");
    }

    #[test]
    fn long_sentence_pruned() {
        let doc = doc_with(&[vec![80]], vec![]);
        let w = extract_window(&doc, &mention(0, 0, 0, false)).unwrap();
        assert!(w.mask[0].iter().all(|&m| m));
        assert_eq!(w.tokens[0][49], "p0s0t49");
    }

    #[test]
    fn centering_rule_enumerated() {
        // hand enumeration: 25 sentences, mention in sentence 12 -> 8..=17, row 4
        let doc = doc_with(&[vec![3; 25]], vec![]);
        let w = extract_window(&doc, &mention(0, 12, 0, false)).unwrap();
        let rows: Vec<_> = w.source_sentences.iter().map(|s| s.unwrap()).collect();
        assert_eq!(rows, (8..=17).collect::<Vec<_>>());
        assert_eq!(w.citation_row, 4);
    }

    #[test]
    fn edges_shift_window() {
        let doc = doc_with(&[vec![3; 25]], vec![]);
        let w = extract_window(&doc, &mention(0, 1, 0, false)).unwrap();
        assert_eq!(w.source_sentences[0], Some(0));
        assert_eq!(w.citation_row, 1);
        let w = extract_window(&doc, &mention(0, 23, 0, false)).unwrap();
        assert_eq!(w.source_sentences[0], Some(15));
        assert_eq!(w.citation_row, 8);
    }

    #[test]
    fn never_crosses_paragraphs() {
        let doc = doc_with(&[vec![4; 3], vec![4; 20]], vec![]);
        let w = extract_window(&doc, &mention(0, 2, 0, false)).unwrap();
        assert!(w.flattened().iter().all(|t| t.starts_with("p0")));
    }

    #[test]
    fn table_paragraph_yields_single_row() {
        let doc = doc_with(&[vec![4, 4, 4]], vec![(0, 0), (0, 1), (0, 2)]);
        let w = extract_window(&doc, &mention(0, 2, 0, true)).unwrap();
        assert!(w.table_only);
        assert_eq!(w.citation_row, 0);
        assert_eq!(w.real_rows().collect::<Vec<_>>(), vec![0]);
        assert_eq!(w.tokens[0][0], "p0s2t0");
    }

    #[test]
    fn citation_sentence_projection() {
        let doc = doc_with(&[vec![4, 6]], vec![]);
        assert_eq!(
            citation_sentence(&doc, &mention(0, 1, 3, false)).unwrap(),
            indexed_sentence(0, 1, 6)
        );
        assert_ne!(
            citation_sentence(&doc, &mention(0, 0, 0, false)).unwrap(),
            citation_sentence(&doc, &mention(0, 1, 0, false)).unwrap()
        );
        assert!(matches!(
            citation_sentence(&doc, &mention(0, 0, 9, false)),
            Err(ContextError::OffsetOutOfRange { .. })
        ));
    }

    #[test]
    fn mention_position_counts_real_tokens() {
        let doc = doc_with(&[vec![3, 4, 5]], vec![]);
        let w = extract_window(&doc, &mention(0, 2, 1, false)).unwrap();
        assert_eq!(w.mention_position(), 3 + 4 + 1);
        assert_eq!(w.flattened()[w.mention_position()], "p0s2t1");
    }

    #[test]
    fn representative_prefers_methods_results() {
        let mut doc = doc_with(&[vec![4, 4]], vec![]);
        let mut intro = doc.sections[0].clone();
        intro.category = SectionCategory::Introduction;
        let mut concl = doc.sections[0].clone();
        concl.category = SectionCategory::Conclusion;
        doc.sections = vec![intro, concl, doc.sections[0].clone()];
        let at = |s, sent| CitationMention {
            section_index: s,
            ..mention(0, sent, 0, false)
        };
        doc.mentions = vec![at(0, 0), at(1, 1), at(2, 1), at(2, 0)];
        assert_eq!(representative_mention(&doc, "R"), Some(&doc.mentions[3]));
        doc.mentions = vec![at(1, 0), at(0, 1)];
        assert_eq!(representative_mention(&doc, "R"), Some(&doc.mentions[1]));
        assert_eq!(representative_mention(&doc, "X"), None);
    }

    #[test]
    fn window_start_stays_in_bounds() {
        for len in 1..40 {
            for center in 0..len {
                let s = window_start(len, center, 10);
                assert!(s <= center && center < s + 10);
                assert!(s + len.min(10) <= len);
            }
        }
    }
}
