use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use baseline_scope::corpus::{assign_splits, PaperDoc, SplitSpec, SplitTag};
use baseline_scope::features::CueLexicon;
use baseline_scope::mma::{Embedder, MmaConfig, PrecomputedEmbedder, ToyEmbedder};
use serde::{Deserialize, Serialize};

pub const ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    /// Use the deterministic hash embedder sized from the model section.
    pub toy: bool,
    /// Directory of precomputed vectors.
    pub dir: Option<PathBuf>,
}

/// Run configuration: the model section plus the inputs around it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cue lexicon file; the built-in lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    pub split: SplitSpec,
    pub model: MmaConfig,
}

/// Overrides shared by every command that runs the model.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct EmbedderFlags {
    /// Use the deterministic toy embedder
    #[arg(long, conflicts_with = "embedder_dir")]
    pub toy_embedder: bool,
    /// Directory of precomputed embeddings (tokens.tsv, pairs/)
    #[arg(long)]
    pub embedder_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a TOML run config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // absolute, so the echoed copy still points at the same files
        let base = std::path::absolute(path.parent().unwrap_or(Path::new(".")))?;
        config.lexicon = config.lexicon.map(|p| base.join(p));
        config.embedder.dir = config.embedder.dir.map(|p| base.join(p));
        Ok(config)
    }

    pub fn apply(&mut self, flags: &EmbedderFlags) {
        if flags.toy_embedder {
            self.embedder = EmbedderConfig { toy: true, dir: None };
        } else if let Some(dir) = &flags.embedder_dir {
            self.embedder = EmbedderConfig {
                toy: false,
                dir: Some(dir.clone()),
            };
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.split.validate()?;
        if self.embedder.toy && self.embedder.dir.is_some() {
            bail!("embedder: set either `toy` or `dir`, not both");
        }
        Ok(())
    }

    pub fn lexicon(&self) -> Result<CueLexicon> {
        match &self.lexicon {
            Some(p) => CueLexicon::load(p).with_context(|| format!("loading lexicon {}", p.display())),
            None => Ok(CueLexicon::default()),
        }
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>> {
        let embedder: Box<dyn Embedder> = match (&self.embedder.dir, self.embedder.toy) {
            (Some(dir), _) => Box::new(PrecomputedEmbedder::open(dir, self.model.layer_count)?),
            (None, true) => Box::new(ToyEmbedder::new(self.model.context_dim, self.model.layer_count)),
            (None, false) => bail!("no embedder configured; pass --toy-embedder or --embedder-dir"),
        };
        self.model.check_embedder(embedder.as_ref())?;
        Ok(embedder)
    }

    pub fn echo(&self, dir: &Path) -> Result<()> {
        let path = dir.join(ECHO_FILE);
        let text = toml::to_string(self).context("serializing config")?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Assigns splits when no paper has one; a partly assigned corpus is an error.
pub fn ensure_splits(docs: Vec<PaperDoc>, spec: &SplitSpec) -> Result<Vec<PaperDoc>> {
    let unassigned = docs.iter().filter(|d| d.split_tag == SplitTag::Unassigned).count();
    if unassigned == 0 {
        return Ok(docs);
    }
    if unassigned != docs.len() {
        bail!(
            "{unassigned} of {} papers have no split; assign all or none",
            docs.len()
        );
    }
    Ok(assign_splits(docs, spec)?)
}
