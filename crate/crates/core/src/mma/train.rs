use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embed::Embedder;
use super::model::{prepare_input, MmaModel, Mode, ModelInput, Prediction};
use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::MmaError;
use crate::corpus::{Label, PaperDoc, SplitTag};
use crate::eval::{compute_metrics, MetricsReport};
use crate::features::FeatureSettings;

/// One reference ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub paper_id: String,
    pub ref_id: String,
    pub label: Label,
    pub input: ModelInput,
}

/// Builds inputs for every reference of the papers tagged `split` (all
/// papers when `None`), in corpus order.
pub fn prepare_examples(
    docs: &[PaperDoc],
    split: Option<SplitTag>,
    settings: &FeatureSettings,
    embedder: &dyn Embedder,
    model: &MmaModel,
) -> Result<Vec<Example>, MmaError> {
    model.config().check_embedder(embedder)?;
    let mut out = Vec::new();
    for doc in docs.iter().filter(|d| split.is_none_or(|s| d.split_tag == s)) {
        for r in &doc.references {
            out.push(Example {
                paper_id: doc.paper_id.clone(),
                ref_id: r.ref_id.clone(),
                label: r.label,
                input: prepare_input(doc, &r.ref_id, settings, embedder, model.config())?,
            });
        }
    }
    Ok(out)
}

fn class_index(label: Label) -> Option<usize> {
    match label {
        Label::Baseline => Some(0),
        Label::NonBaseline => Some(1),
        Label::Unlabeled => None,
    }
}

/// Configured weights, or `N / (2 N_c)` from the labeled examples.
pub fn class_weights(examples: &[Example], configured: Option<[f64; 2]>) -> Result<[f64; 2], MmaError> {
    let mut counts = [0usize; 2];
    for e in examples {
        if let Some(i) = class_index(e.label) {
            counts[i] += 1;
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(MmaError::Training(format!(
            "training data needs both classes (baseline {}, non_baseline {})",
            counts[0], counts[1]
        )));
    }
    Ok(configured.unwrap_or_else(|| {
        let n = (counts[0] + counts[1]) as f64;
        [n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64)]
    }))
}

/// Class-weighted cross-entropy of a batch: `Σ w_y · CE / Σ w_y`.
pub fn batch_loss(
    model: &MmaModel,
    t: &mut Tape,
    batch: &[&Example],
    weights: [f64; 2],
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Var, MmaError> {
    let mut mode = Mode { rng };
    let mut rows = Vec::with_capacity(batch.len());
    let mut target = Array2::zeros((batch.len(), 2));
    let mut total = 0.0;
    for (i, e) in batch.iter().enumerate() {
        let class = class_index(e.label)
            .ok_or_else(|| MmaError::Training(format!("{}/{} is unlabeled", e.paper_id, e.ref_id)))?;
        rows.push(model.forward(t, &e.input, &mut mode)?.logits);
        target[[i, class]] = weights[class];
        total += weights[class];
    }
    let logits = t.concat_rows(&rows);
    let logp = t.log_softmax(logits);
    let target = t.constant(target);
    let picked = t.mul(logp, target);
    let sum = t.sum(picked);
    Ok(t.scale(sum, -1.0 / total))
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<_> = params
            .ids()
            .map(|id| Array2::zeros(params.value(id).raw_dim()))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut ParamStore, grads: &super::tape::Gradients) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            let i = id.index();
            self.m[i].zip_mut_with(g, |m, &g| *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g);
            self.v[i].zip_mut_with(g, |v, &g| *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g);
            let lr = self.lr;
            let (m, v) = (&self.m[i], &self.v[i]);
            ndarray::Zip::from(params.value_mut(id))
                .and(m)
                .and(v)
                .for_each(|p, &m, &v| *p -= lr * (m / c1) / ((v / c2).sqrt() + Self::EPS));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev macro F1 (earliest on ties).
    pub model: MmaModel,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

pub fn evaluate(model: &MmaModel, examples: &[Example]) -> Result<(MetricsReport, Vec<Prediction>), MmaError> {
    let predictions = examples
        .iter()
        .map(|e| model.predict(&e.input))
        .collect::<Result<Vec<_>, _>>()?;
    let (gold, pred): (Vec<Label>, Vec<Label>) = examples
        .iter()
        .zip(&predictions)
        .filter(|(e, _)| e.label.is_labeled())
        .map(|(e, p)| (e.label, p.label))
        .unzip();
    Ok((compute_metrics(&gold, &pred)?, predictions))
}

/// Mini-batch training with Adam on the class-weighted loss. Shuffling and
/// dropout draw from one generator seeded with `config.seed`, so a run is
/// a pure function of its inputs.
pub fn train(initial: MmaModel, train_set: &[Example], dev_set: &[Example]) -> Result<TrainOutcome, MmaError> {
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(MmaError::Training("train and dev sets must be nonempty".into()));
    }
    let config = initial.config().clone();
    let weights = class_weights(train_set, config.class_weights)?;
    let labeled: Vec<&Example> = train_set.iter().filter(|e| e.label.is_labeled()).collect();
    let mut model = initial;
    let mut adam = Adam::new(model.params(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7a1e);
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| labeled[i]).collect();
            let grads = {
                let mut t = Tape::new(model.params());
                let loss = batch_loss(&model, &mut t, &batch, weights, Some(&mut rng))?;
                let value = t.value(loss)[[0, 0]];
                if !value.is_finite() {
                    return Err(MmaError::Training(format!("non-finite loss in epoch {epoch}")));
                }
                loss_sum += value * batch.len() as f64;
                t.backward(loss)
            };
            adam.update(model.params_mut(), &grads);
        }
        let (dev, _) = evaluate(&model, dev_set)?;
        log.push(EpochRecord {
            epoch,
            train_loss: loss_sum / labeled.len() as f64,
            dev_precision: dev.overall.precision,
            dev_recall: dev.overall.recall,
            dev_f1: dev.overall.f1,
        });
        if best.as_ref().is_none_or(|(f1, _, _)| dev.overall.f1 > *f1) {
            best = Some((dev.overall.f1, epoch, model.params().clone()));
        }
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            *model.params_mut() = params;
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome { model, best_epoch, log })
}

/// Denominator floor for relative gradient errors: entries whose analytic
/// and numeric values are both below it are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Parameter group (name without its last component), max relative error, entries checked.
    pub groups: Vec<(String, f64, usize)>,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.groups.iter().map(|g| g.1).fold(0.0, f64::max)
    }
}

/// Compares analytic gradients of the evaluation-mode loss with central
/// differences (step `h`) for every parameter entry.
pub fn gradcheck(model: &MmaModel, batch: &[&Example], weights: [f64; 2], h: f64) -> Result<GradcheckReport, MmaError> {
    let analytic = {
        let mut t = Tape::new(model.params());
        let loss = batch_loss(model, &mut t, batch, weights, None)?;
        t.backward(loss)
    };
    let mut probe = model.clone();
    let mut groups: Vec<(String, f64, usize)> = Vec::new();
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let name = model.params().name(id).to_string();
        let group = name.rsplit_once('.').map_or(name.as_str(), |(g, _)| g).to_string();
        let (rows, cols) = model.params().value(id).dim();
        let mut worst: f64 = 0.0;
        for r in 0..rows {
            for c in 0..cols {
                let orig = model.params().value(id)[[r, c]];
                let mut loss_at = |x: f64| -> Result<f64, MmaError> {
                    probe.params_mut().value_mut(id)[[r, c]] = x;
                    let mut t = Tape::new(probe.params());
                    let l = batch_loss(&probe, &mut t, batch, weights, None)?;
                    Ok(t.value(l)[[0, 0]])
                };
                let numeric = (loss_at(orig + h)? - loss_at(orig - h)?) / (2.0 * h);
                probe.params_mut().value_mut(id)[[r, c]] = orig;
                let a = analytic.get(id).map_or(0.0, |g| g[[r, c]]);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
                worst = worst.max(err);
            }
        }
        match groups.iter_mut().find(|g| g.0 == group) {
            Some(g) => {
                g.1 = g.1.max(worst);
                g.2 += rows * cols;
            }
            None => groups.push((group, worst, rows * cols)),
        }
    }
    Ok(GradcheckReport { groups })
}
