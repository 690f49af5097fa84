mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use baseline_scope::corpus::{
    self, apply_annotations, filter_papers, load_corpus, matched_filter_keyword, read_annotations, read_paper,
    synthetic, validate_corpus, write_corpus, PaperDoc, SectionCategory, SplitTag, MANIFEST_FILE,
};
use baseline_scope::eval::{error_report, ReferencePrediction};
use baseline_scope::features::citations::{fetch_citation_counts, CountCache, FetchOutcome, StubProvider};
use baseline_scope::features::{reference_features, CountTransform, CueLexicon, FeatureSettings};
use baseline_scope::heuristics::{
    corpus_stats, dataset_summary, default_year_buckets, render_corpus_stats, render_rule_table,
    render_section_distribution, render_summary, rule_table, section_distribution, Rendered,
};
use baseline_scope::mma::{
    self, load_checkpoint, prepare_examples, save_checkpoint, Checkpoint, CheckpointExpect, EpochRecord, MmaConfig,
    MmaModel,
};
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{ensure_splits, EmbedderFlags, RunConfig, ECHO_FILE};

#[derive(Parser)]
#[command(
    name = "baseline-scope",
    version,
    about = "Find the baseline references of scientific papers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate paper files and write a normalized corpus
    Ingest {
        /// Directory of paper JSON files (or an existing corpus)
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Drop workshop, demo, tutorial and other non-research papers
        #[arg(long)]
        filter: bool,
        /// Label overlay: paper_id, ref_id, label (tab-separated, with header)
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Assign train/dev/test splits with this seed
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Corpus statistics tables
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Tables to emit: 1 annotation summary, 2 per-period counts,
        /// 4 section distribution, 5 section rules
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,5", value_parser = parse_table_id)]
        tables: Vec<u8>,
        /// First annotator's labels, for the agreement rows of table 1
        #[arg(long, requires = "annotator_b")]
        annotator_a: Option<PathBuf>,
        #[arg(long, requires = "annotator_a")]
        annotator_b: Option<PathBuf>,
    },
    /// Per-reference feature vectors as CSV
    Features {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump every representative context window as TSV
        #[arg(long)]
        windows: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[arg(long, default_value_t = 50)]
        cols: usize,
        #[arg(long, value_enum, default_value_t = Transform::Log1p)]
        count_transform: Transform,
        /// Fill citation counts from a title/year/count TSV, through the cache
        #[arg(long)]
        fetch_counts: Option<PathBuf>,
        /// Cache directory (default: $BASELINE_SCOPE_CACHE or .baseline-scope-cache)
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Train the attention classifier
    Train {
        corpus: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        embedder: EmbedderFlags,
        /// Start from this checkpoint's parameters
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Metrics of a checkpoint on one split
    Evaluate {
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Label and probability for every reference
    Predict {
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = SplitArg::All)]
        split: SplitArg,
    },
    /// Misclassified references grouped by likely cause
    Report {
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Write a synthetic corpus for demos and tests
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        papers: usize,
        #[arg(long, default_value_t = 2021)]
        seed: u64,
        /// Table flag decides the label
        #[arg(long)]
        separable: bool,
        #[arg(long, default_value_t = 4)]
        refs_per_paper: usize,
    },
}

#[derive(Debug, Clone, clap::Args)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run config; defaults to the config.toml next to the checkpoint
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    embedder: EmbedderFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
    All,
}

impl SplitArg {
    fn tag(self) -> Option<SplitTag> {
        match self {
            SplitArg::Train => Some(SplitTag::Train),
            SplitArg::Dev => Some(SplitTag::Dev),
            SplitArg::Test => Some(SplitTag::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Transform {
    Log1p,
    Raw,
}

fn parse_table_id(s: &str) -> Result<u8, String> {
    match s.trim() {
        "1" => Ok(1),
        "2" => Ok(2),
        "4" => Ok(4),
        "5" => Ok(5),
        other => Err(format!("unknown table `{other}` (expected 1, 2, 4 or 5)")),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn ingest(input: &Path, out: &Path, filter: bool, annotations: Option<&Path>, split_seed: Option<u64>) -> Result<()> {
    let mut docs = if input.join(MANIFEST_FILE).exists() {
        load_corpus(input)?
    } else {
        read_paper_dir(input)?
    };
    validate_corpus(&docs)?;
    if let Some(path) = annotations {
        apply_annotations(&mut docs, &read_annotations(path)?)?;
    }
    let (kept, discarded) = if filter {
        filter_papers(docs)
    } else {
        (docs, Vec::new())
    };
    let kept = match split_seed {
        Some(seed) => corpus::assign_splits(
            kept,
            &corpus::SplitSpec {
                seed,
                ..Default::default()
            },
        )?,
        None => kept,
    };
    let manifest = write_corpus(&kept, out)?;
    let mut report = String::from("paper_id\tkeyword\n");
    for d in &discarded {
        report += &format!("{}\t{}\n", d.paper_id, matched_filter_keyword(d).unwrap_or(""));
    }
    write_file(&out.join("discarded.tsv"), report)?;
    println!("kept {}, discarded {}", manifest.papers.len(), discarded.len());
    Ok(())
}

/// Reads every `*.json` in `dir`, reporting each bad file before failing.
fn read_paper_dir(dir: &Path) -> Result<Vec<PaperDoc>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .with_context(|| format!("reading {}", dir.display()))?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    let mut failures = 0;
    for p in &paths {
        match read_paper(p) {
            Ok(d) => docs.push(d),
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                failures += 1;
            }
        }
    }
    if failures > 0 {
        bail!("{failures} of {} paper files failed validation", paths.len());
    }
    Ok(docs)
}

fn emit(out: &Path, id: u8, rendered: Rendered) -> Result<()> {
    write_file(&out.join(format!("table{id}.csv")), &rendered.csv)?;
    write_file(&out.join(format!("table{id}.txt")), &rendered.text)?;
    print!("table {id}\n{}\n", rendered.text);
    Ok(())
}

fn stats(corpus: &Path, out: &Path, tables: &[u8], annotators: Option<(&Path, &Path)>) -> Result<()> {
    let docs = load_corpus(corpus)?;
    create_dir(out)?;
    let mut ids = tables.to_vec();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let rendered = match id {
            1 => {
                let pair = match annotators {
                    Some((a, b)) => Some((read_annotations(a)?, read_annotations(b)?)),
                    None => None,
                };
                let summary = dataset_summary(&docs, pair.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())))?;
                render_summary(&summary)?
            }
            2 => render_corpus_stats(&corpus_stats(&docs, &default_year_buckets())?)?,
            4 => render_section_distribution(&section_distribution(&docs))?,
            5 => render_rule_table(&rule_table(&docs))?,
            _ => unreachable!("table ids are validated by the parser"),
        };
        emit(out, id, rendered)?;
    }
    Ok(())
}

fn features(
    corpus: &Path,
    out: &Path,
    windows: Option<&Path>,
    settings: &FeatureSettings,
    fetch_counts: Option<&Path>,
    cache_dir: Option<&Path>,
) -> Result<()> {
    let mut docs = load_corpus(corpus)?;
    if let Some(stub) = fetch_counts {
        let provider = StubProvider::load(stub)?;
        let dir = cache_dir.map(Path::to_path_buf).unwrap_or_else(CountCache::default_dir);
        let mut cache = CountCache::open(&dir)?;
        let (mut filled, mut failed) = (0, 0);
        for doc in &mut docs {
            let report = fetch_citation_counts(&mut doc.references, &provider, &mut cache)?;
            for e in &report.entries {
                match &e.outcome {
                    FetchOutcome::Filled(_) => filled += 1,
                    FetchOutcome::Failed(msg) => {
                        eprintln!("warning: {} {}: {msg}", doc.paper_id, e.ref_id);
                        failed += 1;
                    }
                    FetchOutcome::NotFound => {}
                }
            }
        }
        println!(
            "citation counts: {filled} filled, {failed} failed, {} provider calls",
            provider.calls()
        );
    }
    let mut header = vec!["paper_id".to_string(), "ref_id".to_string(), "label".to_string()];
    header.extend(SectionCategory::ALL.iter().map(|c| format!("count_{}", c.as_str())));
    header.push("in_table".into());
    header.extend(settings.lexicon.stems().iter().map(|s| format!("cue_{s}")));
    header.push("citation_count".into());
    let mut csv = csv_line(&header);
    let mut dump = String::new();
    for doc in &docs {
        for r in &doc.references {
            let rf = reference_features(doc, &r.ref_id, settings)?;
            let mut row = vec![doc.paper_id.clone(), r.ref_id.clone(), r.label.as_str().to_string()];
            row.extend(rf.features.to_vec().iter().map(|v| v.to_string()));
            csv += &csv_line(&row);
            if let Some(w) = &rf.window {
                for line in w.to_tsv().lines() {
                    dump += &format!("{}\t{}\t{line}\n", doc.paper_id, r.ref_id);
                }
            }
        }
    }
    write_file(out, csv)?;
    if let Some(path) = windows {
        write_file(path, dump)?;
    }
    Ok(())
}

fn csv_line(cells: &[String]) -> String {
    let quoted: Vec<String> = cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect();
    quoted.join(",") + "\n"
}

/// Model fields that fix the parameter shapes.
fn architecture(c: &MmaConfig) -> MmaConfig {
    MmaConfig {
        dropout: 0.0,
        batch_size: 1,
        learning_rate: 1.0,
        epochs: 0,
        class_weights: None,
        seed: 0,
        threshold: 0.5,
        ..c.clone()
    }
}

#[allow(clippy::too_many_arguments)]
fn train(
    corpus: &Path,
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
    flags: &EmbedderFlags,
    resume: Option<&Path>,
) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    config.apply(flags);
    if let Some(s) = seed {
        config.model.seed = s;
    }
    if let Some(e) = epochs {
        config.model.epochs = e;
    }
    config.validate()?;
    let lexicon = config.lexicon()?;
    let lexicon_hash = lexicon.hash();
    let embedder = config.embedder()?;
    let settings = config.model.feature_settings(lexicon)?;
    let docs = ensure_splits(load_corpus(corpus)?, &config.split)?;

    let mut model = MmaModel::new(config.model.clone())?;
    if let Some(path) = resume {
        let ck = load_checkpoint(
            path,
            &CheckpointExpect {
                lexicon_hash: Some(&lexicon_hash),
                embedder_id: Some(&embedder.id()),
                ..Default::default()
            },
        )?;
        if architecture(ck.model.config()) != architecture(&config.model) {
            bail!(
                "checkpoint {} was trained with a different architecture",
                path.display()
            );
        }
        *model.params_mut() = ck.model.params().clone();
    }
    let train_set = prepare_examples(&docs, Some(SplitTag::Train), &settings, embedder.as_ref(), &model)?;
    let dev_set = prepare_examples(&docs, Some(SplitTag::Dev), &settings, embedder.as_ref(), &model)?;
    let outcome = mma::train(model, &train_set, &dev_set)?;

    create_dir(out)?;
    config.echo(out)?;
    save_checkpoint(
        &Checkpoint {
            model: outcome.model,
            lexicon_hash,
            embedder_id: embedder.id(),
        },
        &out.join("model.json"),
    )?;
    write_log(&out.join("train_log.jsonl"), &outcome.log)?;
    println!(
        "trained {} epochs on {} references; best dev epoch {}",
        outcome.log.len(),
        train_set.len(),
        outcome.best_epoch
    );
    Ok(())
}

fn write_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    for record in log {
        writeln!(f, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}

/// A checkpoint with everything needed to run it on a corpus.
struct Loaded {
    config: RunConfig,
    model: MmaModel,
    embedder: Box<dyn mma::Embedder>,
    settings: FeatureSettings,
}

fn load_model(args: &ModelArgs) -> Result<Loaded> {
    let config_path = args.config.clone().or_else(|| {
        let p = args.checkpoint.parent().unwrap_or(Path::new(".")).join(ECHO_FILE);
        p.exists().then_some(p)
    });
    let mut config = match &config_path {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    if let Some(c) = &mut config {
        c.apply(&args.embedder);
    }
    let lexicon = match &config {
        Some(c) => c.lexicon()?,
        None => CueLexicon::default(),
    };
    let lexicon_hash = lexicon.hash();
    let ck = load_checkpoint(
        &args.checkpoint,
        &CheckpointExpect {
            config: config.as_ref().map(|c| &c.model),
            lexicon_hash: Some(&lexicon_hash),
            ..Default::default()
        },
    )?;
    let mut config = config.unwrap_or_else(|| RunConfig {
        model: ck.model.config().clone(),
        ..Default::default()
    });
    config.apply(&args.embedder);
    config.validate()?;
    let embedder = config.embedder()?;
    if embedder.id() != ck.embedder_id {
        bail!(
            "checkpoint {} was trained with embedder '{}', not '{}'",
            args.checkpoint.display(),
            ck.embedder_id,
            embedder.id()
        );
    }
    let settings = config.model.feature_settings(lexicon)?;
    Ok(Loaded {
        config,
        model: ck.model,
        embedder,
        settings,
    })
}

fn run_model(corpus: &Path, args: &ModelArgs, split: SplitArg) -> Result<(Loaded, Vec<PaperDoc>, Vec<mma::Example>)> {
    let loaded = load_model(args)?;
    let docs = load_corpus(corpus)?;
    let docs = match split.tag() {
        Some(_) => ensure_splits(docs, &loaded.config.split)?,
        None => docs,
    };
    let examples = prepare_examples(
        &docs,
        split.tag(),
        &loaded.settings,
        loaded.embedder.as_ref(),
        &loaded.model,
    )?;
    create_dir(&args.out)?;
    loaded.config.echo(&args.out)?;
    Ok((loaded, docs, examples))
}

fn evaluate(corpus: &Path, args: &ModelArgs, split: SplitArg) -> Result<()> {
    let (loaded, _, examples) = run_model(corpus, args, split)?;
    let (metrics, _) = mma::evaluate(&loaded.model, &examples)?;
    write_file(&args.out.join("metrics.json"), metrics.to_json()?)?;
    write_file(&args.out.join("metrics.csv"), metrics.to_csv()?)?;
    write_file(&args.out.join("metrics.txt"), metrics.to_string())?;
    print!("{metrics}");
    Ok(())
}

fn predictions(loaded: &Loaded, examples: &[mma::Example]) -> Result<Vec<ReferencePrediction>> {
    examples
        .iter()
        .map(|e| {
            let p = loaded.model.predict(&e.input)?;
            Ok(ReferencePrediction {
                paper_id: e.paper_id.clone(),
                ref_id: e.ref_id.clone(),
                predicted: p.label,
                prob_baseline: p.prob_baseline,
            })
        })
        .collect()
}

fn predict(corpus: &Path, args: &ModelArgs, split: SplitArg) -> Result<()> {
    let (loaded, _, examples) = run_model(corpus, args, split)?;
    let mut csv = String::from("paper_id,ref_id,predicted,prob_baseline\n");
    for p in predictions(&loaded, &examples)? {
        csv += &csv_line(&[
            p.paper_id,
            p.ref_id,
            p.predicted.as_str().to_string(),
            p.prob_baseline.to_string(),
        ]);
    }
    write_file(&args.out.join("predictions.csv"), csv)?;
    println!("{} references predicted", examples.len());
    Ok(())
}

fn report(corpus: &Path, args: &ModelArgs, split: SplitArg) -> Result<()> {
    let (loaded, docs, examples) = run_model(corpus, args, split)?;
    let preds = predictions(&loaded, &examples)?;
    let report = error_report(&docs, &preds, &loaded.settings)?;
    write_file(&args.out.join("errors.csv"), report.to_csv()?)?;
    let text = report.to_text();
    write_file(&args.out.join("errors.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn synth(out: &Path, papers: usize, seed: u64, separable: bool, refs_per_paper: usize) -> Result<()> {
    let docs = if separable {
        synthetic::separable(papers, refs_per_paper, seed)
    } else {
        synthetic::generate(&synthetic::SynthConfig {
            papers,
            seed,
            ..Default::default()
        })
    };
    let manifest = write_corpus(&docs, out)?;
    println!("wrote {} papers to {}", manifest.papers.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            input,
            out,
            filter,
            annotations,
            split_seed,
        } => ingest(&input, &out, filter, annotations.as_deref(), split_seed),
        Command::Stats {
            corpus,
            out,
            tables,
            annotator_a,
            annotator_b,
        } => {
            let annotators = annotator_a.as_deref().zip(annotator_b.as_deref());
            stats(&corpus, &out, &tables, annotators)
        }
        Command::Features {
            corpus,
            out,
            windows,
            lexicon,
            rows,
            cols,
            count_transform,
            fetch_counts,
            cache_dir,
        } => {
            let lexicon = match lexicon {
                Some(p) => CueLexicon::load(&p).with_context(|| format!("loading lexicon {}", p.display()))?,
                None => CueLexicon::default(),
            };
            let shape = baseline_scope::context::WindowShape { rows, cols };
            if rows == 0 || cols == 0 {
                bail!("window rows and cols must be positive");
            }
            let settings = FeatureSettings {
                lexicon,
                shape,
                count_transform: match count_transform {
                    Transform::Log1p => CountTransform::Log1p,
                    Transform::Raw => CountTransform::Raw,
                },
            };
            features(
                &corpus,
                &out,
                windows.as_deref(),
                &settings,
                fetch_counts.as_deref(),
                cache_dir.as_deref(),
            )
        }
        Command::Train {
            corpus,
            config,
            out,
            seed,
            epochs,
            embedder,
            resume,
        } => train(&corpus, &config, &out, seed, epochs, &embedder, resume.as_deref()),
        Command::Evaluate { corpus, model, split } => evaluate(&corpus, &model, split),
        Command::Predict { corpus, model, split } => predict(&corpus, &model, split),
        Command::Report { corpus, model, split } => report(&corpus, &model, split),
        Command::Synth {
            out,
            papers,
            seed,
            separable,
            refs_per_paper,
        } => synth(&out, papers, seed, separable, refs_per_paper),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
