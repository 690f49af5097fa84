use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, PaperDoc, SplitTag};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitUnit {
    #[default]
    ByPaper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// train / dev / test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
    #[serde(default)]
    pub unit: SplitUnit,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: [0.70, 0.10, 0.20],
            seed: 7,
            unit: SplitUnit::ByPaper,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(CorpusError::Split(format!(
                "ratios must be nonnegative, got {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Split(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Paper counts per split; train and dev are rounded, test takes the rest.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let train = ((n as f64) * self.ratios[0]).round() as usize;
        let dev = (((n as f64) * self.ratios[1]).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        [train, dev, n - train - dev]
    }
}

/// Assigns whole papers to train/dev/test with a seeded shuffle.
pub fn assign_splits(mut docs: Vec<PaperDoc>, spec: &SplitSpec) -> Result<Vec<PaperDoc>, CorpusError> {
    spec.validate()?;
    if docs.len() < 3 {
        return Err(CorpusError::Split(format!(
            "need at least 3 papers, got {}",
            docs.len()
        )));
    }
    if let Some(d) = docs.iter().find(|d| d.split_tag != SplitTag::Unassigned) {
        return Err(CorpusError::Split(format!("paper `{}` already assigned", d.paper_id)));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let [train, dev, _] = spec.counts(docs.len());
    for (rank, &i) in order.iter().enumerate() {
        docs[i].split_tag = if rank < train {
            SplitTag::Train
        } else if rank < train + dev {
            SplitTag::Dev
        } else {
            SplitTag::Test
        };
    }
    Ok(docs)
}
