//! Multi-module attention classifier.
//!
//! Three encoders read one reference: the citation context (word and
//! sentence attention followed by a bidirectional LSTM), the pair of citing
//! title/abstract and citation sentence (layer attention over frozen encoder
//! states followed by a transformer encoder), and the hand-built feature
//! vector (per-family linear maps and feature attention). Module attention
//! fuses the three and a linear head scores the two classes.

mod checkpoint;
pub mod embed;
mod model;
pub mod params;
pub mod tape;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::WindowShape;
use crate::features::{CountTransform, CueLexicon, FeatureSettings, FEATURE_DIM};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointExpect, CHECKPOINT_FORMAT};
pub use embed::{Embedder, PrecomputedEmbedder, ToyEmbedder};
pub use model::{prepare_input, AttentionTrace, MmaModel, ModelInput, Prediction, WindowInput};
pub use train::{
    batch_loss, class_weights, evaluate, gradcheck, prepare_examples, train, EpochRecord, Example, GradcheckReport,
    TrainOutcome, GRADCHECK_FLOOR,
};

#[derive(Debug, Error)]
pub enum MmaError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("embedder: {0}")]
    Embedder(String),
    #[error("training: {0}")]
    Training(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Context(#[from] crate::context::ContextError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmaConfig {
    /// Embedding width; must equal the embedder's dimension.
    pub context_dim: usize,
    pub bilstm_hidden: usize,
    pub dropout: f64,
    pub encoder_layers: usize,
    pub encoder_heads: usize,
    pub encoder_ffn_dim: usize,
    pub fused_dim: usize,
    pub feature_dim: usize,
    pub feature_hidden: usize,
    pub attention_dim: usize,
    pub window_rows: usize,
    pub window_cols: usize,
    pub pair_max_len: usize,
    pub layer_count: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `[baseline, non_baseline]`; inverse class frequency when absent.
    pub class_weights: Option<[f64; 2]>,
    pub seed: u64,
    pub threshold: f64,
    pub count_transform: CountTransform,
}

impl Default for MmaConfig {
    fn default() -> Self {
        MmaConfig {
            context_dim: 768,
            bilstm_hidden: 64,
            dropout: 0.2,
            encoder_layers: 6,
            encoder_heads: 8,
            encoder_ffn_dim: 2048,
            fused_dim: 128,
            feature_dim: FEATURE_DIM,
            feature_hidden: 32,
            attention_dim: 128,
            window_rows: 10,
            window_cols: 50,
            pair_max_len: 512,
            layer_count: 13,
            batch_size: 32,
            learning_rate: 0.001,
            epochs: 20,
            class_weights: None,
            seed: 2021,
            threshold: 0.5,
            count_transform: CountTransform::Log1p,
        }
    }
}

impl MmaConfig {
    /// Small dimensions for tests and demos, paired with [`ToyEmbedder`].
    pub fn toy() -> Self {
        MmaConfig {
            context_dim: 8,
            bilstm_hidden: 4,
            dropout: 0.1,
            encoder_layers: 1,
            encoder_heads: 2,
            encoder_ffn_dim: 16,
            fused_dim: 16,
            feature_hidden: 4,
            attention_dim: 8,
            window_rows: 2,
            window_cols: 5,
            pair_max_len: 12,
            batch_size: 8,
            learning_rate: 0.01,
            epochs: 30,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), MmaError> {
        let positive = [
            ("context_dim", self.context_dim),
            ("bilstm_hidden", self.bilstm_hidden),
            ("encoder_heads", self.encoder_heads),
            ("encoder_ffn_dim", self.encoder_ffn_dim),
            ("fused_dim", self.fused_dim),
            ("feature_hidden", self.feature_hidden),
            ("attention_dim", self.attention_dim),
            ("window_rows", self.window_rows),
            ("window_cols", self.window_cols),
            ("pair_max_len", self.pair_max_len),
            ("layer_count", self.layer_count),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(MmaError::Config(format!("{name} must be positive")));
            }
        }
        if self.feature_dim < 8 {
            return Err(MmaError::Config(
                "feature_dim must leave room for at least one cue".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(MmaError::Config("dropout must lie in [0, 1)".into()));
        }
        if !self.context_dim.is_multiple_of(self.encoder_heads) {
            return Err(MmaError::Config(
                "context_dim must be divisible by encoder_heads".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MmaError::Config("learning_rate must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(MmaError::Config("threshold must lie in (0, 1)".into()));
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(MmaError::Config("class weights must be positive".into()));
            }
        }
        Ok(())
    }

    /// Number of cue weights the feature vector carries.
    pub fn cue_count(&self) -> usize {
        self.feature_dim - 7
    }

    pub fn feature_settings(&self, lexicon: CueLexicon) -> Result<FeatureSettings, MmaError> {
        if lexicon.stems().len() != self.cue_count() {
            return Err(MmaError::Config(format!(
                "feature_dim {} needs {} cues, lexicon has {}",
                self.feature_dim,
                self.cue_count(),
                lexicon.stems().len()
            )));
        }
        Ok(FeatureSettings {
            lexicon,
            shape: WindowShape {
                rows: self.window_rows,
                cols: self.window_cols,
            },
            count_transform: self.count_transform,
        })
    }

    pub fn check_embedder(&self, embedder: &dyn Embedder) -> Result<(), MmaError> {
        if embedder.dimension() != self.context_dim || embedder.layer_count() != self.layer_count {
            return Err(MmaError::Config(format!(
                "embedder {} has dim {} / {} layers, config expects {} / {}",
                embedder.id(),
                embedder.dimension(),
                embedder.layer_count(),
                self.context_dim,
                self.layer_count
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_setup() {
        let c = MmaConfig::default();
        assert_eq!(
            (c.context_dim, c.bilstm_hidden, c.fused_dim, c.feature_dim),
            (768, 64, 128, 52)
        );
        assert_eq!((c.encoder_layers, c.encoder_heads, c.layer_count), (6, 8, 13));
        assert_eq!(
            (c.batch_size, c.learning_rate, c.epochs, c.dropout),
            (32, 0.001, 20, 0.2)
        );
        c.validate().unwrap();
        MmaConfig::toy().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            MmaConfig {
                dropout: 1.0,
                ..MmaConfig::toy()
            },
            MmaConfig {
                encoder_heads: 3,
                ..MmaConfig::toy()
            },
            MmaConfig {
                fused_dim: 0,
                ..MmaConfig::toy()
            },
            MmaConfig {
                class_weights: Some([1.0, 0.0]),
                ..MmaConfig::toy()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = MmaConfig::toy();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<MmaConfig>(&text).unwrap(), c);
        let partial: MmaConfig = toml::from_str("epochs = 3\nclass_weights = [2.0, 1.0]\n").unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.context_dim, 768);
        assert!(toml::from_str::<MmaConfig>("epoch = 3\n").is_err());
    }
}
