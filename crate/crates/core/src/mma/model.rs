use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embed::Embedder;
use super::params::{xavier, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::{MmaConfig, MmaError};
use crate::context::{citation_sentence, ContextWindow};
use crate::corpus::{Label, PaperDoc};
use crate::features::{reference_features, FeatureSettings};

/// Embedded context window: one `cols × dim` matrix per row plus the token mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInput {
    pub rows: Vec<Array2<f64>>,
    pub mask: Vec<Vec<bool>>,
}

impl WindowInput {
    pub fn embed(window: &ContextWindow, embedder: &dyn Embedder) -> Result<Self, MmaError> {
        let rows = window
            .tokens
            .iter()
            .map(|row| embedder.token_embed(row))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(WindowInput {
            rows,
            mask: window.mask.clone(),
        })
    }

    pub fn row_is_real(&self, r: usize) -> bool {
        self.mask[r].iter().any(|&m| m)
    }
}

/// Everything the network reads for one reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// `None` for references never mentioned in the text.
    pub window: Option<WindowInput>,
    /// Layer-wise hidden states of the (title+abstract, citation sentence) pair.
    pub pair: Option<Vec<Array2<f64>>>,
    pub features: Vec<f64>,
}

impl ModelInput {
    pub fn features_only(&self) -> bool {
        self.window.is_none()
    }
}

pub fn prepare_input(
    doc: &PaperDoc,
    ref_id: &str,
    settings: &FeatureSettings,
    embedder: &dyn Embedder,
    config: &MmaConfig,
) -> Result<ModelInput, MmaError> {
    let rf = reference_features(doc, ref_id, settings)?;
    let (window, pair) = match (&rf.mention, &rf.window) {
        (Some(m), Some(w)) => {
            let sentence = citation_sentence(doc, m)?;
            let pair = embedder.encode_pair(&doc.title_abstract(), &sentence, config.pair_max_len)?;
            (Some(WindowInput::embed(w, embedder)?), Some(pair))
        }
        _ => (None, None),
    };
    Ok(ModelInput {
        window,
        pair,
        features: rf.features.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub prob_baseline: f64,
    pub label: Label,
    /// `[baseline, non_baseline]`.
    pub logits: [f64; 2],
    /// Set when the reference had no mention and only features were used.
    pub features_only: bool,
}

/// Weights emitted by the five attention sites for one input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionTrace {
    /// Per window row, weights over its tokens.
    pub word: Vec<Vec<f64>>,
    pub sentence: Vec<f64>,
    pub layer: Vec<f64>,
    pub feature: Vec<f64>,
    pub module: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

/// Additive attention: `score_i = tanh(x_i W + b) · v`.
#[derive(Debug, Clone, Copy)]
struct Attention {
    w: ParamId,
    b: ParamId,
    v: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Lstm {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
    hidden: usize,
}

#[derive(Debug, Clone, Copy)]
struct EncoderLayer {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    norm1: (ParamId, ParamId),
    ff1: Linear,
    ff2: Linear,
    norm2: (ParamId, ParamId),
}

#[derive(Debug, Clone)]
struct Layout {
    word_attn: Attention,
    sentence_attn: Attention,
    lstm_fwd: Lstm,
    lstm_bwd: Lstm,
    context_proj: Linear,
    layer_logits: ParamId,
    encoder: Vec<EncoderLayer>,
    pair_proj: Linear,
    feature_maps: [Linear; 3],
    feature_attn: Attention,
    feature_proj: Linear,
    module_attn: Attention,
    head: Linear,
}

struct Builder<'a> {
    store: ParamStore,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn matrix(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let v = xavier(self.rng, rows, cols);
        self.store.add(name, v)
    }

    fn filled(&mut self, name: String, rows: usize, cols: usize, value: f64) -> ParamId {
        self.store.add(name, Array2::from_elem((rows, cols), value))
    }

    fn linear(&mut self, name: &str, input: usize, output: usize) -> Linear {
        Linear {
            w: self.matrix(format!("{name}.w"), input, output),
            b: self.filled(format!("{name}.b"), 1, output, 0.0),
        }
    }

    fn attention(&mut self, name: &str, input: usize, dim: usize) -> Attention {
        Attention {
            w: self.matrix(format!("{name}.w"), input, dim),
            b: self.filled(format!("{name}.b"), 1, dim, 0.0),
            v: self.matrix(format!("{name}.v"), dim, 1),
        }
    }

    fn lstm(&mut self, name: &str, input: usize, hidden: usize) -> Lstm {
        let wx = self.matrix(format!("{name}.wx"), input, 4 * hidden);
        let wh = self.matrix(format!("{name}.wh"), hidden, 4 * hidden);
        // gate order i, f, g, o; forget gate starts open
        let mut b = Array2::zeros((1, 4 * hidden));
        b.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        let b = self.store.add(format!("{name}.b"), b);
        Lstm { wx, wh, b, hidden }
    }

    fn norm(&mut self, name: &str, dim: usize) -> (ParamId, ParamId) {
        (
            self.filled(format!("{name}.gain"), 1, dim, 1.0),
            self.filled(format!("{name}.bias"), 1, dim, 0.0),
        )
    }
}

/// Per-call state: dropout is active only when a generator is supplied.
pub(crate) struct Mode<'r> {
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl Mode<'_> {
    pub fn eval() -> Mode<'static> {
        Mode { rng: None }
    }

    fn dropout(&mut self, t: &mut Tape, x: Var, p: f64) -> Var {
        let Some(rng) = self.rng.as_deref_mut() else { return x };
        if p == 0.0 {
            return x;
        }
        let (r, c) = t.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mask = Array2::from_shape_fn((r, c), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
        let m = t.constant(mask);
        t.mul(x, m)
    }
}

/// Variables produced by one forward pass.
pub(crate) struct Forward {
    pub logits: Var,
    word: Vec<Option<Var>>,
    sentence: Option<Var>,
    layer: Option<Var>,
    feature: Var,
    module: Var,
}

#[derive(Debug, Clone)]
pub struct MmaModel {
    config: MmaConfig,
    params: ParamStore,
    layout: Layout,
}

impl MmaModel {
    /// Fresh model with parameters drawn from `config.seed`.
    pub fn new(config: MmaConfig) -> Result<Self, MmaError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut b = Builder {
            store: ParamStore::default(),
            rng: &mut rng,
        };
        let d = config.context_dim;
        let a = config.attention_dim;
        let h = config.bilstm_hidden;
        let f = config.fused_dim;
        let fh = config.feature_hidden;
        let word_attn = b.attention("context.word_attn", d, a);
        let sentence_attn = b.attention("context.sentence_attn", d, a);
        let lstm_fwd = b.lstm("context.lstm_fwd", d, h);
        let lstm_bwd = b.lstm("context.lstm_bwd", d, h);
        let context_proj = b.linear("context.proj", 2 * h, f);
        let layer_logits = b.filled("pair.layer_attn.logits".into(), 1, config.layer_count, 0.0);
        let encoder = (0..config.encoder_layers)
            .map(|i| {
                let p = format!("pair.encoder{i}");
                EncoderLayer {
                    q: b.linear(&format!("{p}.q"), d, d),
                    k: b.linear(&format!("{p}.k"), d, d),
                    v: b.linear(&format!("{p}.v"), d, d),
                    o: b.linear(&format!("{p}.o"), d, d),
                    norm1: b.norm(&format!("{p}.norm1"), d),
                    ff1: b.linear(&format!("{p}.ff1"), d, config.encoder_ffn_dim),
                    ff2: b.linear(&format!("{p}.ff2"), config.encoder_ffn_dim, d),
                    norm2: b.norm(&format!("{p}.norm2"), d),
                }
            })
            .collect();
        let pair_proj = b.linear("pair.proj", d, f);
        let feature_maps = [
            b.linear("features.location", 6, fh),
            b.linear("features.cue", config.cue_count(), fh),
            b.linear("features.count", 1, fh),
        ];
        let feature_attn = b.attention("features.attn", fh, a);
        let feature_proj = b.linear("features.proj", fh, f);
        let module_attn = b.attention("fusion.module_attn", f, a);
        let head = b.linear("fusion.head", f, 2);
        let params = b.store;
        Ok(MmaModel {
            config,
            params,
            layout: Layout {
                word_attn,
                sentence_attn,
                lstm_fwd,
                lstm_bwd,
                context_proj,
                layer_logits,
                encoder,
                pair_proj,
                feature_maps,
                feature_attn,
                feature_proj,
                module_attn,
                head,
            },
        })
    }

    pub fn config(&self) -> &MmaConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check_input(&self, input: &ModelInput) -> Result<(), MmaError> {
        let c = &self.config;
        if input.features.len() != c.feature_dim {
            return Err(MmaError::Input(format!(
                "feature vector has {} entries, expected {}",
                input.features.len(),
                c.feature_dim
            )));
        }
        if input.window.is_some() != input.pair.is_some() {
            return Err(MmaError::Input(
                "window and pair must both be present or both absent".into(),
            ));
        }
        if let Some(w) = &input.window {
            let shape_ok = w.rows.len() == c.window_rows
                && w.mask.len() == c.window_rows
                && w.rows.iter().all(|r| r.dim() == (c.window_cols, c.context_dim))
                && w.mask.iter().all(|m| m.len() == c.window_cols);
            if !shape_ok {
                return Err(MmaError::Input("window shape does not match config".into()));
            }
            if !(0..c.window_rows).any(|r| w.row_is_real(r)) {
                return Err(MmaError::Input("context window is fully masked".into()));
            }
        }
        if let Some(p) = &input.pair {
            let seq = p.first().map_or(0, |l| l.nrows());
            let shape_ok = p.len() == c.layer_count
                && seq > 0
                && seq <= c.pair_max_len
                && p.iter().all(|l| l.dim() == (seq, c.context_dim));
            if !shape_ok {
                return Err(MmaError::Input("pair encoding shape does not match config".into()));
            }
        }
        Ok(())
    }

    /// Returns attention weights (1×n) over the rows of `x`; `mask` marks usable rows.
    fn attend(&self, t: &mut Tape, x: Var, attn: Attention, mask: Option<&[bool]>) -> Var {
        let u = t.affine(x, attn.w, attn.b);
        let u = t.tanh(u);
        let v = t.param(attn.v);
        let scores = t.matmul(u, v);
        let scores = t.transpose(scores);
        match mask {
            Some(m) => {
                let m = Array2::from_shape_vec((1, m.len()), m.to_vec()).expect("mask row");
                t.masked_softmax(scores, Some(&m))
            }
            None => t.softmax(scores),
        }
    }

    fn lstm_final(&self, t: &mut Tape, seq: &[Var], cell: Lstm) -> Var {
        let hd = cell.hidden;
        let mut h = t.constant(Array2::zeros((1, hd)));
        let mut c = t.constant(Array2::zeros((1, hd)));
        let wx = t.param(cell.wx);
        let wh = t.param(cell.wh);
        let b = t.param(cell.b);
        for &x in seq {
            let zx = t.matmul(x, wx);
            let zh = t.matmul(h, wh);
            let z = t.add(zx, zh);
            let z = t.add_row(z, b);
            let i = t.slice_cols(z, 0, hd);
            let i = t.sigmoid(i);
            let f = t.slice_cols(z, hd, hd);
            let f = t.sigmoid(f);
            let g = t.slice_cols(z, 2 * hd, hd);
            let g = t.tanh(g);
            let o = t.slice_cols(z, 3 * hd, hd);
            let o = t.sigmoid(o);
            let fc = t.mul(f, c);
            let ig = t.mul(i, g);
            c = t.add(fc, ig);
            let tc = t.tanh(c);
            h = t.mul(o, tc);
        }
        h
    }

    fn context(&self, t: &mut Tape, w: &WindowInput, mode: &mut Mode) -> (Var, Vec<Option<Var>>, Var) {
        let l = &self.layout;
        let c = &self.config;
        let mut sentence_vecs = Vec::with_capacity(c.window_rows);
        let mut word_weights = Vec::with_capacity(c.window_rows);
        for (r, emb) in w.rows.iter().enumerate() {
            if !w.row_is_real(r) {
                sentence_vecs.push(t.constant(Array2::zeros((1, c.context_dim))));
                word_weights.push(None);
                continue;
            }
            let x = t.constant(emb.clone());
            let alpha = self.attend(t, x, l.word_attn, Some(&w.mask[r]));
            sentence_vecs.push(t.matmul(alpha, x));
            word_weights.push(Some(alpha));
        }
        let s = t.concat_rows(&sentence_vecs);
        let row_mask: Vec<bool> = (0..c.window_rows).map(|r| w.row_is_real(r)).collect();
        let beta = self.attend(t, s, l.sentence_attn, Some(&row_mask));
        let beta_col = t.transpose(beta);
        let attended = t.mul_col(s, beta_col);
        let seq: Vec<Var> = (0..c.window_rows)
            .filter(|&r| row_mask[r])
            .map(|r| t.slice_rows(attended, r, 1))
            .collect();
        let fwd = self.lstm_final(t, &seq, l.lstm_fwd);
        let rev: Vec<Var> = seq.iter().rev().copied().collect();
        let bwd = self.lstm_final(t, &rev, l.lstm_bwd);
        let hcat = t.concat_cols(&[fwd, bwd]);
        let hcat = mode.dropout(t, hcat, c.dropout);
        (t.affine(hcat, l.context_proj.w, l.context_proj.b), word_weights, beta)
    }

    fn encoder_layer(&self, t: &mut Tape, x: Var, layer: &EncoderLayer, mode: &mut Mode) -> Var {
        let c = &self.config;
        let heads = c.encoder_heads;
        let dh = c.context_dim / heads;
        let q = t.affine(x, layer.q.w, layer.q.b);
        let k = t.affine(x, layer.k.w, layer.k.b);
        let v = t.affine(x, layer.v.w, layer.v.b);
        let mut outs = Vec::with_capacity(heads);
        for hidx in 0..heads {
            let qh = t.slice_cols(q, hidx * dh, dh);
            let kh = t.slice_cols(k, hidx * dh, dh);
            let vh = t.slice_cols(v, hidx * dh, dh);
            let kt = t.transpose(kh);
            let scores = t.matmul(qh, kt);
            let scores = t.scale(scores, 1.0 / (dh as f64).sqrt());
            let a = t.softmax(scores);
            outs.push(t.matmul(a, vh));
        }
        let cat = t.concat_cols(&outs);
        let o = t.affine(cat, layer.o.w, layer.o.b);
        let o = mode.dropout(t, o, c.dropout);
        let x1 = t.add(x, o);
        let x1 = self.norm(t, x1, layer.norm1);
        let f = t.affine(x1, layer.ff1.w, layer.ff1.b);
        let f = t.relu(f);
        let f = t.affine(f, layer.ff2.w, layer.ff2.b);
        let f = mode.dropout(t, f, c.dropout);
        let x2 = t.add(x1, f);
        self.norm(t, x2, layer.norm2)
    }

    fn norm(&self, t: &mut Tape, x: Var, (gain, bias): (ParamId, ParamId)) -> Var {
        let n = t.layer_norm(x, 1e-5);
        let g = t.param(gain);
        let b = t.param(bias);
        let n = t.mul_row(n, g);
        t.add_row(n, b)
    }

    fn pair(&self, t: &mut Tape, layers: &[Array2<f64>], mode: &mut Mode) -> (Var, Var) {
        let l = &self.layout;
        let logits = t.param(l.layer_logits);
        let gamma = t.softmax(logits);
        let mut mix = None;
        for (k, layer) in layers.iter().enumerate() {
            let hk = t.constant(layer.clone());
            let gk = t.slice_cols(gamma, k, 1);
            let term = t.mul_scalar(hk, gk);
            mix = Some(match mix {
                None => term,
                Some(acc) => t.add(acc, term),
            });
        }
        let mut x = mix.expect("at least one layer");
        for layer in &l.encoder {
            x = self.encoder_layer(t, x, layer, mode);
        }
        let first = t.slice_rows(x, 0, 1);
        let first = mode.dropout(t, first, self.config.dropout);
        (t.affine(first, l.pair_proj.w, l.pair_proj.b), gamma)
    }

    fn feature_block(&self, t: &mut Tape, fv: &[f64]) -> (Var, Var) {
        let l = &self.layout;
        let cues = self.config.cue_count();
        let families = [&fv[..6], &fv[6..6 + cues], &fv[6 + cues..]];
        let reps: Vec<Var> = families
            .iter()
            .zip(l.feature_maps)
            .map(|(values, map)| {
                let x = t.constant(Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row"));
                t.affine(x, map.w, map.b)
            })
            .collect();
        let r = t.concat_rows(&reps);
        let phi = self.attend(t, r, l.feature_attn, None);
        let pooled = t.matmul(phi, r);
        (t.affine(pooled, l.feature_proj.w, l.feature_proj.b), phi)
    }

    pub(crate) fn forward(&self, t: &mut Tape, input: &ModelInput, mode: &mut Mode) -> Result<Forward, MmaError> {
        self.check_input(input)?;
        let l = &self.layout;
        let f = self.config.fused_dim;
        let (ctx, word, sentence) = match &input.window {
            Some(w) => {
                let (v, word, s) = self.context(t, w, mode);
                (v, word, Some(s))
            }
            None => (t.constant(Array2::zeros((1, f))), Vec::new(), None),
        };
        let (pair, layer) = match &input.pair {
            Some(p) => {
                let (v, g) = self.pair(t, p, mode);
                (v, Some(g))
            }
            None => (t.constant(Array2::zeros((1, f))), None),
        };
        let (feat, feature) = self.feature_block(t, &input.features);
        let m = t.concat_rows(&[ctx, pair, feat]);
        let mu = self.attend(t, m, l.module_attn, None);
        let fused = t.matmul(mu, m);
        let fused = mode.dropout(t, fused, self.config.dropout);
        let logits = t.affine(fused, l.head.w, l.head.b);
        Ok(Forward {
            logits,
            word,
            sentence,
            layer,
            feature,
            module: mu,
        })
    }

    pub fn predict(&self, input: &ModelInput) -> Result<Prediction, MmaError> {
        let mut t = Tape::new(&self.params);
        let out = self.forward(&mut t, input, &mut Mode::eval())?;
        let z = t.value(out.logits);
        let logits = [z[[0, 0]], z[[0, 1]]];
        let prob_baseline = 1.0 / (1.0 + (logits[1] - logits[0]).exp());
        Ok(Prediction {
            prob_baseline,
            label: if prob_baseline >= self.config.threshold {
                Label::Baseline
            } else {
                Label::NonBaseline
            },
            logits,
            features_only: input.features_only(),
        })
    }

    pub fn attention(&self, input: &ModelInput) -> Result<AttentionTrace, MmaError> {
        let mut t = Tape::new(&self.params);
        let out = self.forward(&mut t, input, &mut Mode::eval())?;
        let row = |v: Var| t.value(v).iter().copied().collect::<Vec<f64>>();
        let cols = self.config.window_cols;
        Ok(AttentionTrace {
            word: out
                .word
                .iter()
                .map(|w| w.map_or_else(|| vec![0.0; cols], row))
                .collect(),
            sentence: out.sentence.map(row).unwrap_or_default(),
            layer: out.layer.map(row).unwrap_or_default(),
            feature: row(out.feature),
            module: row(out.module),
        })
    }

    /// Context module output (1 × fused_dim), evaluation mode.
    pub fn encode_context(&self, window: &WindowInput) -> Result<Array2<f64>, MmaError> {
        let input = ModelInput {
            window: Some(window.clone()),
            pair: Some(vec![
                Array2::zeros((1, self.config.context_dim));
                self.config.layer_count
            ]),
            features: vec![0.0; self.config.feature_dim],
        };
        self.check_input(&input)?;
        let mut t = Tape::new(&self.params);
        let (v, _, _) = self.context(&mut t, window, &mut Mode::eval());
        Ok(t.value(v).clone())
    }

    /// Pair module output (1 × fused_dim), evaluation mode.
    pub fn encode_pair(&self, layers: &[Array2<f64>]) -> Result<Array2<f64>, MmaError> {
        let c = &self.config;
        let seq = layers.first().map_or(0, |l| l.nrows());
        if layers.len() != c.layer_count || seq == 0 || layers.iter().any(|l| l.dim() != (seq, c.context_dim)) {
            return Err(MmaError::Input("pair encoding shape does not match config".into()));
        }
        let mut t = Tape::new(&self.params);
        let (v, _) = self.pair(&mut t, layers, &mut Mode::eval());
        Ok(t.value(v).clone())
    }

    /// Feature module output (1 × fused_dim).
    pub fn encode_features(&self, features: &[f64]) -> Result<Array2<f64>, MmaError> {
        if features.len() != self.config.feature_dim {
            return Err(MmaError::Input("feature vector length does not match config".into()));
        }
        let mut t = Tape::new(&self.params);
        let (v, _) = self.feature_block(&mut t, features);
        Ok(t.value(v).clone())
    }
}
