//! Token and text-pair embedding providers.
//!
//! The model never tokenizes or runs a language model itself; it asks an
//! [`Embedder`] for frozen vectors. [`ToyEmbedder`] is a deterministic hash
//! embedding used by tests and demos. [`PrecomputedEmbedder`] reads vectors
//! exported offline from a pretrained encoder.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::MmaError;
use crate::context::PAD_TOKEN;

pub trait Embedder {
    /// Stable identifier recorded in checkpoints.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn layer_count(&self) -> usize;
    /// One row per token; padding rows are zero.
    fn token_embed(&self, tokens: &[String]) -> Result<Array2<f64>, MmaError>;
    /// Hidden states of every encoder layer for the pair `a` followed by `b`,
    /// each `sequence × dimension`, with the sequence at most `max_len` long.
    fn encode_pair(&self, a: &[String], b: &[String], max_len: usize) -> Result<Vec<Array2<f64>>, MmaError>;
}

/// Keeps all of `b` that fits, then fills the remaining budget from the front of `a`.
pub fn truncate_pair<'t>(a: &'t [String], b: &'t [String], max_len: usize) -> (&'t [String], &'t [String]) {
    let b = &b[..b.len().min(max_len)];
    let a = &a[..a.len().min(max_len - b.len())];
    (a, b)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash embedding: each lowercased token seeds a generator that fills its
/// vector with values in [-1, 1). Layer `k` of a pair encoding is the
/// token vector scaled by `(k + 1) / layer_count` plus a small position term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyEmbedder {
    pub dimension: usize,
    pub layer_count: usize,
}

impl ToyEmbedder {
    pub fn new(dimension: usize, layer_count: usize) -> Self {
        ToyEmbedder { dimension, layer_count }
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        if token == PAD_TOKEN {
            return vec![0.0; self.dimension];
        }
        let mut state = fnv1a(token.to_lowercase().as_bytes());
        (0..self.dimension)
            .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 52) as f64 - 1.0)
            .collect()
    }
}

impl Embedder for ToyEmbedder {
    fn id(&self) -> String {
        format!("toy-hash/v1:dim={}:layers={}", self.dimension, self.layer_count)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn layer_count(&self) -> usize {
        self.layer_count
    }

    fn token_embed(&self, tokens: &[String]) -> Result<Array2<f64>, MmaError> {
        let mut out = Array2::zeros((tokens.len(), self.dimension));
        for (r, t) in tokens.iter().enumerate() {
            for (c, v) in self.vector(t).into_iter().enumerate() {
                out[[r, c]] = v;
            }
        }
        Ok(out)
    }

    fn encode_pair(&self, a: &[String], b: &[String], max_len: usize) -> Result<Vec<Array2<f64>>, MmaError> {
        if a.is_empty() || b.is_empty() {
            return Err(MmaError::Input("pair encoding needs two nonempty sequences".into()));
        }
        let (a, b) = truncate_pair(a, b, max_len);
        let seq: Vec<String> = a.iter().chain(b).cloned().collect();
        let base = self.token_embed(&seq)?;
        Ok((0..self.layer_count)
            .map(|k| {
                let scale = (k + 1) as f64 / self.layer_count as f64;
                let mut layer = &base * scale;
                for (t, mut row) in layer.rows_mut().into_iter().enumerate() {
                    row.mapv_inplace(|v| v + 0.01 * ((t + 1) as f64).ln());
                }
                layer
            })
            .collect())
    }
}

#[derive(Debug, Deserialize)]
struct PairFile {
    layers: Vec<Vec<Vec<f64>>>,
}

/// Vectors exported from a pretrained encoder.
///
/// `tokens.tsv` holds `token<TAB>v1 v2 ...` lines (unknown tokens map to
/// zero). Pair encodings live in `pairs/<key>.json` as
/// `{"layers": [[[f64; dim]; seq]; layer_count]}` where `key` is
/// [`PrecomputedEmbedder::pair_key`] of the truncated pair.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    dir: PathBuf,
    dimension: usize,
    layer_count: usize,
    tokens: HashMap<String, Vec<f64>>,
    digest: String,
}

impl PrecomputedEmbedder {
    pub fn open(dir: &Path, layer_count: usize) -> Result<Self, MmaError> {
        let path = dir.join("tokens.tsv");
        let text = fs::read_to_string(&path).map_err(|e| MmaError::Embedder(format!("{}: {e}", path.display())))?;
        let mut tokens = HashMap::new();
        let mut dimension = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| MmaError::Embedder(format!("{} line {}: missing tab", path.display(), i + 1)))?;
            let v: Vec<f64> = values
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| MmaError::Embedder(format!("{} line {}: {e}", path.display(), i + 1)))?;
            if *dimension.get_or_insert(v.len()) != v.len() || v.iter().any(|x| !x.is_finite()) {
                return Err(MmaError::Embedder(format!(
                    "{} line {}: bad vector",
                    path.display(),
                    i + 1
                )));
            }
            tokens.insert(token.to_string(), v);
        }
        let dimension = dimension.ok_or_else(|| MmaError::Embedder(format!("{} is empty", path.display())))?;
        Ok(PrecomputedEmbedder {
            dir: dir.to_path_buf(),
            dimension,
            layer_count,
            tokens,
            digest: hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string(),
        })
    }

    pub fn pair_key(a: &[String], b: &[String]) -> String {
        let mut h = Sha256::new();
        h.update(a.join(" ").as_bytes());
        h.update([0x1f]);
        h.update(b.join(" ").as_bytes());
        hex::encode(h.finalize())
    }
}

impl Embedder for PrecomputedEmbedder {
    fn id(&self) -> String {
        format!(
            "precomputed/v1:{}:dim={}:layers={}",
            self.digest, self.dimension, self.layer_count
        )
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn layer_count(&self) -> usize {
        self.layer_count
    }

    fn token_embed(&self, tokens: &[String]) -> Result<Array2<f64>, MmaError> {
        let mut out = Array2::zeros((tokens.len(), self.dimension));
        for (r, t) in tokens.iter().enumerate() {
            if let Some(v) = self.tokens.get(t.as_str()) {
                out.row_mut(r).assign(&ndarray::ArrayView1::from(v.as_slice()));
            }
        }
        Ok(out)
    }

    fn encode_pair(&self, a: &[String], b: &[String], max_len: usize) -> Result<Vec<Array2<f64>>, MmaError> {
        if a.is_empty() || b.is_empty() {
            return Err(MmaError::Input("pair encoding needs two nonempty sequences".into()));
        }
        let (a, b) = truncate_pair(a, b, max_len);
        let path = self.dir.join("pairs").join(format!("{}.json", Self::pair_key(a, b)));
        let text = fs::read_to_string(&path).map_err(|e| MmaError::Embedder(format!("{}: {e}", path.display())))?;
        let file: PairFile =
            serde_json::from_str(&text).map_err(|e| MmaError::Embedder(format!("{}: {e}", path.display())))?;
        if file.layers.len() != self.layer_count {
            return Err(MmaError::Embedder(format!(
                "{}: {} layers, expected {}",
                path.display(),
                file.layers.len(),
                self.layer_count
            )));
        }
        file.layers
            .into_iter()
            .map(|layer| {
                let seq = layer.len();
                if seq == 0 || seq > max_len || layer.iter().any(|r| r.len() != self.dimension) {
                    return Err(MmaError::Embedder(format!("{}: bad layer shape", path.display())));
                }
                let flat: Vec<f64> = layer.into_iter().flatten().collect();
                if flat.iter().any(|x| !x.is_finite()) {
                    return Err(MmaError::Embedder(format!("{}: non-finite value", path.display())));
                }
                Ok(Array2::from_shape_vec((seq, self.dimension), flat).expect("checked shape"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::toks;

    #[test]
    fn toy_is_deterministic_and_case_insensitive() {
        let e = ToyEmbedder::new(8, 13);
        assert_eq!(e.vector("Baseline"), e.vector("baseline"));
        assert_ne!(e.vector("baseline"), e.vector("baselines"));
        assert!(e.vector("x").iter().all(|v| (-1.0..1.0).contains(v)));
        assert_eq!(e.vector(PAD_TOKEN), vec![0.0; 8]);
        assert_eq!(e.id(), "toy-hash/v1:dim=8:layers=13");
    }

    #[test]
    fn toy_pair_shapes_and_truncation() {
        let e = ToyEmbedder::new(4, 13);
        let layers = e.encode_pair(&toks("a b c d e f"), &toks("x y z"), 5).unwrap();
        assert_eq!(layers.len(), 13);
        assert!(layers.iter().all(|l| l.dim() == (5, 4)));
        assert!(e.encode_pair(&[], &toks("x"), 5).is_err());
        let (long_a, long_b) = (toks("a b"), toks("1 2 3 4 5 6"));
        let (a, b) = truncate_pair(&long_a, &long_b, 4);
        assert_eq!((a.len(), b.len()), (0, 4));
    }

    #[test]
    fn precomputed_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tokens.tsv"), "we\t1 0\nbaseline\t0 2\n").unwrap();
        fs::create_dir(dir.path().join("pairs")).unwrap();
        let (a, b) = (toks("t"), toks("we baseline"));
        let key = PrecomputedEmbedder::pair_key(&a, &b);
        fs::write(
            dir.path().join("pairs").join(format!("{key}.json")),
            r#"{"layers": [[[1,2],[3,4],[5,6]], [[0,0],[0,0],[0,1]]]}"#,
        )
        .unwrap();
        let e = PrecomputedEmbedder::open(dir.path(), 2).unwrap();
        assert_eq!(e.dimension(), 2);
        let m = e.token_embed(&toks("baseline unknown")).unwrap();
        assert_eq!(m, ndarray::array![[0.0, 2.0], [0.0, 0.0]]);
        let layers = e.encode_pair(&a, &b, 8).unwrap();
        assert_eq!(layers[0][[2, 1]], 6.0);
        assert!(e.encode_pair(&a, &toks("other"), 8).is_err());
        assert!(e.id().starts_with("precomputed/v1:"));
    }
}
