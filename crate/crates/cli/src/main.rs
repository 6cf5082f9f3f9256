//! `multisense` command-line front end.

mod plot;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multisense::corpus::{build_vocab, with_lines};
use multisense::eval::{evaluate, load_dataset, nearest_neighbors, Metric};
use multisense::loss::read_loss_report;
use multisense::{Clusterer, Error, PartialConfig, Result, SenseVectors};

#[derive(Parser)]
#[command(name = "multisense", version, about = "Multi-sense word embeddings from loss-driven sense splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Train a model and write it with its split log, loss reports and manifest.
    Train(TrainArgs),
    /// Score a model against a word-similarity dataset.
    Eval(EvalArgs),
    /// List the nearest sense vectors of a token.
    Neighbors(NeighborArgs),
    /// Turn a loss report into a sorted loss curve.
    LossPlot(PlotArgs),
    /// Count the vocabulary of a corpus.
    Vocab(VocabArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file with any subset of the run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    corpus: Option<Vec<PathBuf>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    loss_threshold: Option<f64>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    max_freq: Option<u64>,
    #[arg(long)]
    epochs_per_check: Option<usize>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    final_epochs: Option<usize>,
    /// i1 or spherical
    #[arg(long)]
    clusterer: Option<Clusterer>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    sample_cap: Option<usize>,
    /// Also write the context vectors next to the model.
    #[arg(long)]
    write_context: bool,
}

impl TrainArgs {
    fn flags(&self) -> PartialConfig {
        PartialConfig {
            corpus: self.corpus.clone(),
            output: self.output.clone(),
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            subsample: self.subsample,
            min_count: self.min_count,
            loss_threshold: self.loss_threshold,
            min_freq: self.min_freq,
            max_freq: self.max_freq,
            epochs_per_check: self.epochs_per_check,
            outer_iters: self.outer_iters,
            final_epochs: self.final_epochs,
            clusterer: self.clusterer,
            learning_rate: self.learning_rate,
            seed: self.seed,
            threads: self.threads,
            min_cluster_size: self.min_cluster_size,
            sample_cap: self.sample_cap,
            write_context: self.write_context.then_some(true),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    model: PathBuf,
    /// SCWS-style contextual pairs or WordSim-style plain pairs.
    dataset: PathBuf,
    /// maxsimc, avgsimc or avgsim
    #[arg(long, default_value = "maxsimc")]
    metric: Metric,
}

#[derive(Args)]
struct NeighborArgs {
    model: PathBuf,
    token: String,
    /// Only this sense; every sense when omitted.
    #[arg(long)]
    sense: Option<usize>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
}

#[derive(Args)]
struct PlotArgs {
    report: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// svg or dat; inferred from the output extension when omitted.
    #[arg(long)]
    format: Option<plot::Format>,
    /// Draw a horizontal line at this loss.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long, num_args = 1.., required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn load_model(path: &Path) -> Result<SenseVectors> {
    SenseVectors::read_text(open(path)?, &path.display().to_string())
}

fn stdout_error(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn train(args: TrainArgs) -> Result<()> {
    let base = match &args.config {
        Some(path) => PartialConfig::load(path)?,
        None => PartialConfig::default(),
    };
    let config = base.overlay(args.flags()).resolve()?;
    let (trained, paths) = multisense::pipeline::run(&config)?;
    let splits: usize = trained.iterations.iter().map(|r| r.splits.len()).sum();
    log::info!(
        "{} words, {} occurrences, {} splits, largest sense count {}",
        trained.vocab.len(),
        trained.store.len(),
        splits,
        trained.model.max_sense_count()
    );
    println!("model\t{}", paths.model.display());
    if let Some(ctx) = &paths.context {
        println!("context\t{}", ctx.display());
    }
    println!("splits\t{}", paths.split_log.display());
    for report in &paths.loss_reports {
        println!("loss\t{}", report.display());
    }
    println!("vocab\t{}", paths.vocab.display());
    println!("manifest\t{}", paths.manifest.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let vectors = load_model(&args.model)?;
    let dataset = load_dataset(&args.dataset)?;
    let report = evaluate(&vectors, &dataset, args.metric)?;
    print!("{report}");
    Ok(())
}

fn neighbors(args: NeighborArgs) -> Result<()> {
    let vectors = load_model(&args.model)?;
    let id = vectors
        .id(&args.token)
        .ok_or_else(|| Error::UnknownToken(args.token.clone()))?;
    let senses: Vec<usize> = match args.sense {
        Some(s) => vec![s],
        None => (0..vectors.sense_count(id)).collect(),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (i, &sense) in senses.iter().enumerate() {
        let list = nearest_neighbors(&vectors, &args.token, sense, args.top_k)?;
        if i > 0 {
            writeln!(out).map_err(stdout_error)?;
        }
        writeln!(out, "{}", vectors.label(id, sense)).map_err(stdout_error)?;
        for n in list {
            writeln!(out, "  {}\t{:.6}", n.label, n.cosine).map_err(stdout_error)?;
        }
    }
    Ok(())
}

fn loss_plot(args: PlotArgs) -> Result<()> {
    let origin = args.report.display().to_string();
    let rows = read_loss_report(open(&args.report)?, &origin)?;
    if rows.is_empty() {
        return Err(Error::format(origin, 0, "loss report is empty"));
    }
    let format = args.format.unwrap_or_else(|| plot::Format::infer(&args.output));
    let mut out = create(&args.output)?;
    plot::write(&rows, format, args.threshold, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&args.output, e))
}

fn vocab(args: VocabArgs) -> Result<()> {
    let vocab = with_lines(&args.corpus, |lines| build_vocab(lines, args.min_count))?;
    match &args.output {
        Some(path) => {
            let mut out = create(path)?;
            vocab.write_tsv(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
        }
        None => vocab.write_tsv(io::stdout().lock()).map_err(stdout_error),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Neighbors(a) => neighbors(a),
        Command::LossPlot(a) => loss_plot(a),
        Command::Vocab(a) => vocab(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
