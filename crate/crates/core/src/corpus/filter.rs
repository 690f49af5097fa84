use super::PaperDoc;

/// Title/venue keywords marking papers without a full comparative evaluation.
pub const FILTER_KEYWORDS: [&str; 10] = [
    "short papers",
    "workshop",
    "demo",
    "tutorial",
    "poster",
    "project notes",
    "shared task",
    "doctoral consortium",
    "companion volume",
    "interactive presentation",
];

/// First banned keyword found in the lowercased title or venue.
///
/// Plain substring matching: "A Demo-nstrably Good Parser" is caught by
/// "demo".
pub fn matched_filter_keyword(doc: &PaperDoc) -> Option<&'static str> {
    let title = doc.title.join(" ").to_lowercase();
    let venue = doc.venue.to_lowercase();
    FILTER_KEYWORDS
        .into_iter()
        .find(|k| title.contains(k) || venue.contains(k))
}

/// Splits `docs` into (kept, discarded), preserving input order in each.
pub fn filter_papers(docs: Vec<PaperDoc>) -> (Vec<PaperDoc>, Vec<PaperDoc>) {
    docs.into_iter().partition(|d| matched_filter_keyword(d).is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{tiny_doc, toks};

    fn doc(title: &str, venue: &str) -> PaperDoc {
        let mut d = tiny_doc();
        d.title = toks(title);
        d.venue = venue.into();
        d
    }

    #[test]
    fn short_papers_venue_discarded() {
        let d = doc("Parsing", "Proceedings of ACL (Short Papers)");
        assert_eq!(matched_filter_keyword(&d), Some("short papers"));
    }

    #[test]
    fn plain_long_paper_kept() {
        assert_eq!(
            matched_filter_keyword(&doc("Neural parsing", "Proceedings of EMNLP")),
            None
        );
    }

    #[test]
    fn substring_match_is_coarse() {
        let d = doc("A Demo-nstrably Good Parser", "Proceedings of ACL");
        assert_eq!(matched_filter_keyword(&d), Some("demo"));
        // "workshops" contains "workshop"
        assert!(matched_filter_keyword(&doc("x", "Joint Workshops on NLP")).is_some());
    }

    #[test]
    fn keywords_span_title_tokens() {
        let d = doc("Findings of the Shared Task on Parsing", "Proceedings of CoNLL");
        assert_eq!(matched_filter_keyword(&d), Some("shared task"));
    }
}
