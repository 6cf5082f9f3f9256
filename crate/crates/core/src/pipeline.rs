//! End-to-end training run: corpus → vocabulary → occurrences → iterative
//! training and splitting → output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::corpus::{build_vocab, extract_occurrences, with_lines, OccurrenceStore, Vocabulary};
use crate::error::{Error, Result};
use crate::loss::{loss_report, write_loss_report, CandidateFilter};
use crate::math::mix_seed;
use crate::split::{
    iteration_seed, ldmi_iterate, write_split_log, EpochSummary, IterationReport, LdmiOptions, SplitParams,
};
use crate::trainer::{train_pass, NegativeSampler, SenseModel, TrainOptions};

/// Everything a run produces in memory.
#[derive(Clone, Debug)]
pub struct Trained {
    pub vocab: Vocabulary,
    pub store: OccurrenceStore,
    pub model: SenseModel,
    pub filter: CandidateFilter,
    pub iterations: Vec<IterationReport>,
    pub final_epochs: Vec<EpochSummary>,
}

/// Frequency gate of a run: explicit bounds, or the default gate scaled to
/// the corpus size.
pub fn candidate_filter(config: &RunConfig, vocab: &Vocabulary) -> Result<CandidateFilter> {
    let (lo, hi) = CandidateFilter::scaled_gate(vocab.total_tokens());
    CandidateFilter::new(
        config.loss_threshold,
        config.min_freq.unwrap_or(lo),
        config.max_freq.unwrap_or(hi.max(config.min_freq.unwrap_or(lo))),
    )
}

fn extraction_seed(seed: u64) -> u64 {
    mix_seed(seed, 0xC0)
}

/// Vocabulary and occurrence store of in-memory lines.
pub fn prepare_lines<S: AsRef<str>>(config: &RunConfig, lines: &[S]) -> Result<(Vocabulary, OccurrenceStore)> {
    let vocab = build_vocab(lines, config.min_count)?;
    let store = extract_occurrences(lines, &vocab, config.window, config.subsample, extraction_seed(config.seed))?;
    Ok((vocab, store))
}

/// Vocabulary and occurrence store of the configured corpus files; the files
/// are read twice.
pub fn prepare_files(config: &RunConfig) -> Result<(Vocabulary, OccurrenceStore)> {
    let vocab = with_lines(&config.corpus, |lines| build_vocab(lines, config.min_count))?;
    log::info!("vocabulary: {} words, {} tokens", vocab.len(), vocab.total_tokens());
    let store = with_lines(&config.corpus, |lines| {
        extract_occurrences(lines, &vocab, config.window, config.subsample, extraction_seed(config.seed))
    })?;
    log::info!("{} occurrences", store.len());
    Ok((vocab, store))
}

/// Runs `outer_iters` rounds of training and splitting, then
/// `final_epochs` more epochs.
pub fn train(config: &RunConfig, vocab: Vocabulary, mut store: OccurrenceStore) -> Result<Trained> {
    config.validate()?;
    if vocab.is_empty() || store.is_empty() {
        return Err(Error::Precondition("corpus yields no occurrences".into()));
    }
    let mut model = SenseModel::new(vocab.len(), config.dim, config.learning_rate, mix_seed(config.seed, 0x1A))?;
    let mut sampler = NegativeSampler::new(vocab.counts(), config.negatives, mix_seed(config.seed, 0x5A))?;
    let filter = candidate_filter(config, &vocab)?;
    let opts = LdmiOptions {
        epochs_per_check: config.epochs_per_check,
        outer_iters: config.outer_iters,
        threads: config.threads,
        seed: config.seed,
        split: SplitParams {
            clusterer: config.clusterer,
            min_cluster_size: config.min_cluster_size,
            sample_cap: config.sample_cap,
            ..SplitParams::default()
        },
    };
    let iterations = ldmi_iterate(&mut model, &mut store, &mut sampler, &vocab, &filter, &opts)?;
    let final_epochs = if config.final_epochs > 0 {
        let train = TrainOptions {
            epochs: config.final_epochs,
            threads: config.threads,
            seed: iteration_seed(config.seed, config.outer_iters),
        };
        train_pass(&mut model, &store, &mut sampler, &train)?
            .iter()
            .map(|e| EpochSummary {
                steps: e.steps,
                mean_loss: e.mean_loss,
                mean_contextual_loss: e.mean_contextual_loss,
            })
            .collect()
    } else {
        Vec::new()
    };
    if !model.all_finite() {
        return Err(Error::Invariant("training produced non-finite parameters".into()));
    }
    Ok(Trained {
        vocab,
        store,
        model,
        filter,
        iterations,
        final_epochs,
    })
}

/// Files written next to the model.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub model: PathBuf,
    pub context: Option<PathBuf>,
    pub split_log: PathBuf,
    pub loss_reports: Vec<PathBuf>,
    pub vocab: PathBuf,
    pub manifest: PathBuf,
}

fn sibling(model: &Path, suffix: &str) -> PathBuf {
    let mut name = model.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    model.with_file_name(name)
}

impl OutputPaths {
    pub fn for_config(config: &RunConfig) -> Self {
        let model = config.output.clone();
        OutputPaths {
            context: config.write_context.then(|| sibling(&model, ".ctx")),
            split_log: sibling(&model, ".splits.tsv"),
            loss_reports: (1..=config.outer_iters)
                .map(|i| sibling(&model, &format!(".loss.{i}.tsv")))
                .collect(),
            vocab: sibling(&model, ".vocab.tsv"),
            manifest: sibling(&model, ".manifest.toml"),
            model,
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_outputs(config: &RunConfig, trained: &Trained) -> Result<OutputPaths> {
    let paths = OutputPaths::for_config(config);
    write_file(&paths.model, |out| trained.model.write_text(&trained.vocab, out))?;
    if let Some(ctx) = &paths.context {
        write_file(ctx, |out| trained.model.context_vectors(&trained.vocab).write_text(out))?;
    }
    let records: Vec<_> = trained.iterations.iter().flat_map(|r| r.splits.iter().cloned()).collect();
    write_file(&paths.split_log, |out| write_split_log(&records, &trained.vocab, out))?;
    for (report, path) in trained.iterations.iter().zip(&paths.loss_reports) {
        let rows = loss_report(&report.ledger, &trained.vocab);
        write_file(path, |out| write_loss_report(&rows, out))?;
    }
    write_file(&paths.vocab, |out| trained.vocab.write_tsv(out))?;
    let manifest = config.manifest()?;
    write_file(&paths.manifest, |out| out.write_all(manifest.as_bytes()))?;
    Ok(paths)
}

/// Full run from the configured corpus files to the output files.
pub fn run(config: &RunConfig) -> Result<(Trained, OutputPaths)> {
    config.validate()?;
    let (vocab, store) = prepare_files(config)?;
    let trained = train(config, vocab, store)?;
    let paths = write_outputs(config, &trained)?;
    Ok((trained, paths))
}
