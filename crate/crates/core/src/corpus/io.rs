use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_corpus, CorpusError, Label, PaperDoc};

pub const SCHEMA_VERSION: &str = "baseline-corpus/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: String,
    /// Paper files relative to the corpus directory, in corpus order.
    pub papers: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn paper_id_hint(text: &str) -> String {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("paper_id").and_then(|p| p.as_str()).map(str::to_string))
        .unwrap_or_else(|| "<unknown>".to_string())
}

/// Parses one paper file, naming the offending field on schema errors.
pub fn read_paper(path: &Path) -> Result<PaperDoc, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let doc: PaperDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| CorpusError::Schema {
        paper_id: paper_id_hint(&text),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    doc.validate()?;
    Ok(doc)
}

pub fn write_paper(doc: &PaperDoc, path: &Path) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(doc).expect("PaperDoc serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn paper_file_name(paper_id: &str) -> String {
    let safe: String = paper_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

/// Loads every paper listed in `dir/manifest.json`.
///
/// An empty directory is an empty corpus. A non-empty directory without a
/// manifest is rejected.
pub fn load_corpus(dir: &Path) -> Result<Vec<PaperDoc>, CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        return if entries.next().is_none() {
            Ok(Vec::new())
        } else {
            Err(CorpusError::Manifest(format!("{} not found", manifest_path.display())))
        };
    }
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(CorpusError::Manifest(format!(
            "unsupported schema version `{}` (expected `{SCHEMA_VERSION}`)",
            manifest.schema_version
        )));
    }
    let docs = manifest
        .papers
        .iter()
        .map(|file| read_paper(&dir.join(file)))
        .collect::<Result<Vec<_>, _>>()?;
    validate_corpus(&docs)?;
    Ok(docs)
}

/// Writes one file per paper plus the manifest. Output is byte-stable.
pub fn write_corpus(docs: &[PaperDoc], dir: &Path) -> Result<Manifest, CorpusError> {
    validate_corpus(docs)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut papers = Vec::with_capacity(docs.len());
    for doc in docs {
        let name = paper_file_name(&doc.paper_id);
        write_paper(doc, &dir.join(&name))?;
        papers.push(name);
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION.to_string(),
        papers,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub paper_id: String,
    pub ref_id: String,
    pub label: Label,
}

/// Reads a tab-separated `paper_id ref_id label` overlay with a header row.
pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| CorpusError::Annotation(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| CorpusError::Annotation(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn write_annotations(annotations: &[Annotation], path: &Path) -> Result<(), CorpusError> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| CorpusError::Annotation(format!("{}: {e}", path.display())))?;
    for a in annotations {
        writer
            .serialize(a)
            .map_err(|e| CorpusError::Annotation(e.to_string()))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Overwrites reference labels from an overlay. Unknown ids are errors.
pub fn apply_annotations(docs: &mut [PaperDoc], annotations: &[Annotation]) -> Result<(), CorpusError> {
    let index: HashMap<&str, usize> = docs.iter().enumerate().map(|(i, d)| (d.paper_id.as_str(), i)).collect();
    let mut updates = Vec::with_capacity(annotations.len());
    for a in annotations {
        let &di = index
            .get(a.paper_id.as_str())
            .ok_or_else(|| CorpusError::Annotation(format!("unknown paper_id `{}`", a.paper_id)))?;
        let ri = docs[di]
            .references
            .iter()
            .position(|r| r.ref_id == a.ref_id)
            .ok_or_else(|| CorpusError::Annotation(format!("`{}` has no ref_id `{}`", a.paper_id, a.ref_id)))?;
        updates.push((di, ri, a.label));
    }
    for (di, ri, label) in updates {
        docs[di].references[ri].label = label;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::tiny_doc;

    #[test]
    fn round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut docs = vec![tiny_doc(), tiny_doc(), tiny_doc()];
        docs[1].paper_id = "P2".into();
        docs[2].paper_id = "P/3".into();
        write_corpus(&docs, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded, docs);

        let first = fs::read(dir.path().join("P1.json")).unwrap();
        let again = tempfile::tempdir().unwrap();
        write_corpus(&loaded, again.path()).unwrap();
        assert_eq!(first, fs::read(again.path().join("P1.json")).unwrap());
        assert_eq!(
            fs::read(dir.path().join(MANIFEST_FILE)).unwrap(),
            fs::read(again.path().join(MANIFEST_FILE)).unwrap()
        );
    }

    #[test]
    fn empty_directory_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_corpus(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn schema_error_names_paper_and_field() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&[tiny_doc()], dir.path()).unwrap();
        let path = dir.path().join("P1.json");
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"year\": 2012", "\"year\": \"soon\"");
        fs::write(&path, text).unwrap();
        match load_corpus(dir.path()) {
            Err(CorpusError::Schema { paper_id, field, .. }) => {
                assert_eq!(paper_id, "P1");
                assert_eq!(field, "year");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_ref_on_load_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&[tiny_doc()], dir.path()).unwrap();
        let path = dir.path().join("P1.json");
        let text = fs::read_to_string(&path).unwrap();
        let text = text.replacen(
            "\"ref_id\": \"R1\",\n      \"section_index\"",
            "\"ref_id\": \"R7\",\n      \"section_index\"",
            1,
        );
        fs::write(&path, text).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::Integrity { .. })));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&[tiny_doc()], dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace(SCHEMA_VERSION, "baseline-corpus/0");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::Manifest(_))));
    }

    #[test]
    fn annotations_round_trip_and_apply() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        let overlay = vec![Annotation {
            paper_id: "P1".into(),
            ref_id: "R1".into(),
            label: Label::NonBaseline,
        }];
        write_annotations(&overlay, &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "paper_id\tref_id\tlabel\nP1\tR1\tnon_baseline\n"
        );
        let back = read_annotations(&path).unwrap();
        assert_eq!(back, overlay);
        let mut docs = vec![tiny_doc()];
        apply_annotations(&mut docs, &back).unwrap();
        assert_eq!(docs[0].references[0].label, Label::NonBaseline);

        let bad = vec![Annotation {
            paper_id: "P1".into(),
            ref_id: "R9".into(),
            label: Label::Baseline,
        }];
        assert!(apply_annotations(&mut docs, &bad).is_err());
    }
}
