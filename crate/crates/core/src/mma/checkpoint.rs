use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::MmaModel;
use super::{MmaConfig, MmaError};

pub const CHECKPOINT_FORMAT: &str = "baseline-scope-checkpoint/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    config: MmaConfig,
    lexicon_hash: String,
    embedder_id: String,
    params: Vec<ParamEntry>,
}

/// A trained model with the identifiers it was trained against.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: MmaModel,
    pub lexicon_hash: String,
    pub embedder_id: String,
}

/// What the caller requires of a checkpoint; `None` fields are not checked.
#[derive(Debug, Clone, Default)]
pub struct CheckpointExpect<'a> {
    pub config: Option<&'a MmaConfig>,
    pub lexicon_hash: Option<&'a str>,
    pub embedder_id: Option<&'a str>,
}

fn err(path: &Path, message: impl Into<String>) -> MmaError {
    MmaError::Checkpoint {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), MmaError> {
    let params = checkpoint.model.params();
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        config: checkpoint.model.config().clone(),
        lexicon_hash: checkpoint.lexicon_hash.clone(),
        embedder_id: checkpoint.embedder_id.clone(),
        params: params
            .ids()
            .map(|id| {
                let v = params.value(id);
                ParamEntry {
                    name: params.name(id).to_string(),
                    rows: v.nrows(),
                    cols: v.ncols(),
                    data: v.iter().copied().collect(),
                }
            })
            .collect(),
    };
    let text = serde_json::to_string(&file).map_err(|e| err(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| err(path, e.to_string()))
}

pub fn load_checkpoint(path: &Path, expect: &CheckpointExpect) -> Result<Checkpoint, MmaError> {
    let text = fs::read_to_string(path).map_err(|e| err(path, e.to_string()))?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| err(path, e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(err(
            path,
            format!("format '{}', expected '{CHECKPOINT_FORMAT}'", file.format),
        ));
    }
    if let Some(c) = expect.config {
        if *c != file.config {
            return Err(err(path, "config differs from the one the checkpoint was trained with"));
        }
    }
    if let Some(h) = expect.lexicon_hash {
        if h != file.lexicon_hash {
            return Err(err(
                path,
                format!("cue lexicon hash {} does not match {h}", file.lexicon_hash),
            ));
        }
    }
    if let Some(id) = expect.embedder_id {
        if id != file.embedder_id {
            return Err(err(
                path,
                format!("embedder '{}' does not match '{id}'", file.embedder_id),
            ));
        }
    }
    let mut model = MmaModel::new(file.config)?;
    if file.params.len() != model.params().len() {
        return Err(err(
            path,
            format!(
                "{} parameter tensors, model has {}",
                file.params.len(),
                model.params().len()
            ),
        ));
    }
    for entry in file.params {
        let id = model
            .params()
            .find(&entry.name)
            .ok_or_else(|| err(path, format!("unknown parameter {}", entry.name)))?;
        let expected = model.params().value(id).dim();
        if expected != (entry.rows, entry.cols) {
            return Err(err(
                path,
                format!(
                    "parameter {} has shape {}x{}, expected {expected:?}",
                    entry.name, entry.rows, entry.cols
                ),
            ));
        }
        let value = Array2::from_shape_vec((entry.rows, entry.cols), entry.data)
            .map_err(|e| err(path, format!("parameter {}: {e}", entry.name)))?;
        *model.params_mut().value_mut(id) = value;
    }
    Ok(Checkpoint {
        model,
        lexicon_hash: file.lexicon_hash,
        embedder_id: file.embedder_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkpoint() -> Checkpoint {
        let mut model = MmaModel::new(MmaConfig::toy()).unwrap();
        let id = model.params().find("fusion.head.b").unwrap();
        model.params_mut().value_mut(id)[[0, 1]] = 0.1 + 0.2;
        Checkpoint {
            model,
            lexicon_hash: "abc".into(),
            embedder_id: "toy".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let ck = checkpoint();
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(
            &path,
            &CheckpointExpect {
                config: Some(&MmaConfig::toy()),
                lexicon_hash: Some("abc"),
                embedder_id: Some("toy"),
            },
        )
        .unwrap();
        assert_eq!(back.model.params(), ck.model.params());
    }

    #[test]
    fn mismatches_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&checkpoint(), &path).unwrap();
        let other = MmaConfig {
            fused_dim: 8,
            ..MmaConfig::toy()
        };
        for expect in [
            CheckpointExpect {
                lexicon_hash: Some("zzz"),
                ..Default::default()
            },
            CheckpointExpect {
                embedder_id: Some("other"),
                ..Default::default()
            },
            CheckpointExpect {
                config: Some(&other),
                ..Default::default()
            },
        ] {
            assert!(matches!(
                load_checkpoint(&path, &expect),
                Err(MmaError::Checkpoint { .. })
            ));
        }
        let text = fs::read_to_string(&path).unwrap().replace(CHECKPOINT_FORMAT, "other/9");
        fs::write(&path, text).unwrap();
        assert!(load_checkpoint(&path, &CheckpointExpect::default()).is_err());
    }

    #[test]
    fn tampered_shapes_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&checkpoint(), &path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["params"][0]["rows"] = serde_json::json!(999);
        fs::write(&path, v.to_string()).unwrap();
        assert!(load_checkpoint(&path, &CheckpointExpect::default()).is_err());
    }
}
