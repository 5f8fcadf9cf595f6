//! `spheretopic` command-line interface.
//!
//! Exit codes: 0 ok, 2 input format, 3 training failure, 4 usage,
//! 5 verification failure. Log verbosity comes from `SPHERETOPIC_LOG`.

mod config;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use log::info;

use spheretopic::checkpoint::Checkpoint;
use spheretopic::corpus::{load_corpus, read_labels, write_embeddings, write_vocabulary};
use spheretopic::error::{CheckpointError, CorpusError, FormatError, NumericError, TheoremError, TrainError};
use spheretopic::metrics::{cluster_documents, nmi, topic_metrics};
use spheretopic::report::export_report;
use spheretopic::theorem::{verify_equivalence, DEFAULT_TOLERANCE};
use spheretopic::train::{fit, format_epoch_line, pretrain};
use spheretopic::{AttentionParams, Corpus, TopicReport};

use config::RunConfig;

/// A failure together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 4,
            error: anyhow!(msg.into()),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure { code: 2, error: e.into() }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::InvalidMinCount => 4,
            _ => 2,
        };
        Failure { code, error: e.into() }
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure { code: 2, error: e.into() }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let code = match e {
            TrainError::Config(_) => 4,
            _ => 3,
        };
        Failure { code, error: e.into() }
    }
}

impl From<NumericError> for Failure {
    fn from(e: NumericError) -> Self {
        Failure { code: 3, error: e.into() }
    }
}

impl From<TheoremError> for Failure {
    fn from(e: TheoremError) -> Self {
        Failure { code: 5, error: e.into() }
    }
}

#[derive(Parser)]
#[command(name = "spheretopic", version, about = "Topic discovery in a spherical latent space of contextualized embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and filter a corpus, print its size, optionally write the filtered files.
    Ingest(CorpusArgs),
    /// Pretrain the autoencoder, place topics by k-means and write a checkpoint.
    Pretrain(TrainArgs),
    /// Train the full model and write checkpoint, logs and topic report.
    Train(TrainArgs),
    /// Write the topic report of a checkpoint.
    Topics(ModelArgs),
    /// Compute coherence, diversity and optionally NMI for a checkpoint.
    Eval(EvalArgs),
    /// Check the mixture-posterior identity on random instances.
    VerifyTheorem(VerifyArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding file.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Vocabulary TSV.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Words occurring fewer times are removed [default: 5].
    #[arg(long)]
    min_count: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    num_topics: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Start from a pretrained checkpoint instead of pretraining (train only).
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Words listed per topic [default: 10].
    #[arg(long)]
    top_m: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Words per topic for diversity [default: 25].
    #[arg(long)]
    diversity_m: Option<usize>,
    /// Sliding window for UCI [default: 10].
    #[arg(long)]
    window: Option<usize>,
    /// Document label TSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Cluster documents and report NMI against the labels.
    #[arg(long)]
    nmi: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Embedding dimension r.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// Number of mixture components |V|.
    #[arg(long, default_value_t = 32)]
    vocab_size: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

fn base_config(args: &CorpusArgs) -> Result<RunConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            RunConfig::from_text(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.embeddings {
        config.embeddings = Some(p.clone());
    }
    if let Some(p) = &args.vocab {
        config.vocab = Some(p.clone());
    }
    if let Some(n) = args.min_count {
        config.min_count = n;
    }
    if let Some(p) = &args.out {
        config.out_dir = Some(p.clone());
    }
    Ok(config)
}

fn train_config(args: &TrainArgs) -> Result<RunConfig, Failure> {
    let mut config = base_config(&args.corpus)?;
    let t = &mut config.train;
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field.clone() { t.$field = v; })*
        };
    }
    flag!(seed, lambda, num_topics, latent_dim, kappa, epochs, pretrain_epochs, learning_rate, batch_size);
    Ok(config)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| Failure::usage(format!("missing {what} (flag or config key)")))
}

/// Checks that the inputs exist and prepares the output directory before any compute.
fn validate_paths(config: &RunConfig, needs_out: bool) -> Result<(), Failure> {
    for (path, what) in [(&config.embeddings, "--embeddings"), (&config.vocab, "--vocab")] {
        let path = required(path, what)?;
        if !path.is_file() {
            return Err(FormatError::Io {
                path: path.to_owned(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            }
            .into());
        }
    }
    if needs_out {
        let out = required(&config.out_dir, "--out")?;
        fs::create_dir_all(out).map_err(|e| FormatError::Io {
            path: out.to_owned(),
            source: e,
        })?;
    }
    Ok(())
}

fn load(config: &RunConfig) -> Result<Corpus, Failure> {
    let embeddings = required(&config.embeddings, "--embeddings")?;
    let vocab = required(&config.vocab, "--vocab")?;
    let corpus = load_corpus(embeddings, vocab)?;
    let (filtered, removed) = corpus.filter_vocabulary(config.min_count)?;
    info!(
        "min_count {}: removed {} words, {} tokens, {} documents",
        config.min_count,
        removed.removed_words.len(),
        removed.removed_tokens,
        removed.dropped_documents.len()
    );
    Ok(filtered)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| FormatError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(())
}

fn cmd_ingest(args: &CorpusArgs) -> Result<(), Failure> {
    let config = base_config(args)?;
    validate_paths(&config, config.out_dir.is_some())?;
    let embeddings = required(&config.embeddings, "--embeddings")?;
    let vocab = required(&config.vocab, "--vocab")?;
    let corpus = load_corpus(embeddings, vocab)?;
    let (filtered, removed) = corpus.filter_vocabulary(config.min_count)?;
    println!(
        "{} docs, {} tokens, {} words",
        filtered.num_documents(),
        filtered.num_tokens(),
        filtered.vocabulary().len()
    );
    println!(
        "min_count {}: removed {} words and {} tokens, dropped {} docs",
        config.min_count,
        removed.removed_words.len(),
        removed.removed_tokens,
        removed.dropped_documents.len()
    );
    if let Some(out) = &config.out_dir {
        write_embeddings(&out.join("embeddings.bin"), &filtered)?;
        write_vocabulary(&out.join("vocab.tsv"), filtered.vocabulary())?;
    }
    Ok(())
}

fn cmd_pretrain(args: &TrainArgs) -> Result<(), Failure> {
    let config = train_config(args)?;
    if args.print_config {
        print!("{}", config.to_text());
        return Ok(());
    }
    if args.pretrained.is_some() {
        return Err(Failure::usage("--pretrained applies to `train` only"));
    }
    validate_paths(&config, true)?;
    let out = required(&config.out_dir, "--out")?;
    let corpus = load(&config)?;
    let pretrained = pretrain(&corpus, &config.train)?;
    let attention = AttentionParams::init(
        corpus.dim(),
        config.train.attention_dim,
        &mut spheretopic::rng::substream(config.train.seed, "attention"),
    );
    let checkpoint = Checkpoint {
        seed: config.train.seed,
        model: pretrained.model,
        attention,
    };
    checkpoint.write(&out.join("pretrained.bin"))?;
    write_file(&out.join("pretrain_log.tsv"), pretrain_log(&pretrained.losses).as_bytes())?;
    write_file(&out.join("config.txt"), config.to_text().as_bytes())?;
    println!(
        "pretraining loss {:.6e} -> {:.6e}",
        pretrained.losses[0],
        pretrained.losses[pretrained.losses.len() - 1]
    );
    Ok(())
}

fn pretrain_log(losses: &[f64]) -> String {
    let mut log = String::from("epoch\tmean_pre\n");
    for (i, l) in losses.iter().enumerate() {
        log.push_str(&format!("{i}\t{l:.8e}\n"));
    }
    log
}

fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    let config = train_config(args)?;
    if args.print_config {
        print!("{}", config.to_text());
        return Ok(());
    }
    validate_paths(&config, true)?;
    if let Some(p) = &args.pretrained {
        if !p.is_file() {
            return Err(Failure::usage(format!("{}: no such checkpoint", p.display())));
        }
    }
    let out = required(&config.out_dir, "--out")?;
    let corpus = load(&config)?;
    let t = &config.train;
    let (start, pretrain_losses) = match &args.pretrained {
        Some(path) => (Checkpoint::read(path)?, None),
        None => {
            let pretrained = pretrain(&corpus, t)?;
            let attention = AttentionParams::init(
                corpus.dim(),
                t.attention_dim,
                &mut spheretopic::rng::substream(t.seed, "attention"),
            );
            let checkpoint = Checkpoint {
                seed: t.seed,
                model: pretrained.model,
                attention,
            };
            (checkpoint, Some(pretrained.losses))
        }
    };
    let (model, attention, epochs, _) = fit(&corpus, t, start.model, start.attention)?;

    let mut epoch_log = format!("# lambda = {}\nepoch\tclus\trec\tpre\ttotal\n", t.lambda);
    for (i, loss) in epochs.iter().enumerate() {
        epoch_log.push_str(&format_epoch_line(i + 1, loss));
        epoch_log.push('\n');
    }
    let report = TopicReport::build(&model, &attention, &corpus, config.metrics.m)?;
    let checkpoint = Checkpoint {
        seed: t.seed,
        model,
        attention,
    };
    checkpoint.write(&out.join("checkpoint.bin"))?;
    write_file(&out.join("epoch_log.tsv"), epoch_log.as_bytes())?;
    if let Some(losses) = pretrain_losses {
        write_file(&out.join("pretrain_log.tsv"), pretrain_log(&losses).as_bytes())?;
    }
    write_file(&out.join("config.txt"), config.to_text().as_bytes())?;
    export_report(&report, out)?;
    println!("lambda {}, {} epochs", t.lambda, epochs.len());
    if let Some(last) = epochs.last() {
        println!("final epoch loss {:.6e}", last.total);
    }
    Ok(())
}

fn model_config(args: &ModelArgs) -> Result<RunConfig, Failure> {
    let mut config = base_config(&args.corpus)?;
    if let Some(m) = args.top_m {
        config.metrics.m = m;
    }
    Ok(config)
}

fn load_model(args: &ModelArgs, config: &RunConfig) -> Result<(Checkpoint, Corpus), Failure> {
    if !args.checkpoint.is_file() {
        return Err(FormatError::Io {
            path: args.checkpoint.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        }
        .into());
    }
    let checkpoint = Checkpoint::read(&args.checkpoint)?;
    let corpus = load(config)?;
    if checkpoint.model.dim() != corpus.dim() {
        return Err(Failure {
            code: 2,
            error: anyhow!(
                "checkpoint expects dimension {} but the corpus has {}",
                checkpoint.model.dim(),
                corpus.dim()
            ),
        });
    }
    Ok((checkpoint, corpus))
}

fn cmd_topics(args: &ModelArgs) -> Result<(), Failure> {
    let config = model_config(args)?;
    validate_paths(&config, true)?;
    let (checkpoint, corpus) = load_model(args, &config)?;
    let report = TopicReport::build(&checkpoint.model, &checkpoint.attention, &corpus, config.metrics.m)?;
    export_report(&report, required(&config.out_dir, "--out")?)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (k, words) in report.topics().iter().enumerate() {
        let surfaces: Vec<&str> = words.iter().map(|w| w.surface.as_str()).collect();
        let _ = writeln!(lock, "{k}\t{}", surfaces.join(" "));
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let mut config = model_config(&args.model)?;
    if let Some(m) = args.diversity_m {
        config.metrics.diversity_m = m;
    }
    if let Some(w) = args.window {
        config.metrics.window = w;
    }
    if let Some(l) = &args.labels {
        config.labels = Some(l.clone());
    }
    if args.nmi {
        match &config.labels {
            None => return Err(Failure::usage("--nmi needs a label file (--labels)")),
            Some(l) if !l.is_file() => {
                return Err(Failure::usage(format!("{}: label file not found", l.display())))
            }
            Some(_) => {}
        }
    }
    validate_paths(&config, true)?;
    let (checkpoint, corpus) = load_model(&args.model, &config)?;
    let list_len = config.metrics.m.max(config.metrics.diversity_m);
    let report = TopicReport::build(&checkpoint.model, &checkpoint.attention, &corpus, list_len)?;
    let mut metrics = topic_metrics(&report.word_lists(), &corpus, config.metrics)?;
    if args.nmi {
        let labels = read_labels(required(&config.labels, "--labels")?)?;
        let by_id: HashMap<u64, String> = labels.into_iter().collect();
        let truth = corpus
            .documents()
            .iter()
            .map(|d| {
                by_id.get(&d.doc_id).cloned().ok_or_else(|| Failure {
                    code: 2,
                    error: anyhow!("document {} has no label", d.doc_id),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let k_eval = truth.iter().collect::<BTreeSet<_>>().len();
        if k_eval < 2 {
            return Err(Failure {
                code: 2,
                error: anyhow!("labels must name at least two classes"),
            });
        }
        let predicted = cluster_documents(&checkpoint.model, &checkpoint.attention, &corpus, k_eval, checkpoint.seed)?;
        metrics.nmi = Some(nmi(&predicted, &truth)?);
    }
    let mut json = serde_json::to_string_pretty(&metrics).map_err(|e| Failure { code: 3, error: e.into() })?;
    json.push('\n');
    write_file(&required(&config.out_dir, "--out")?.join("metrics.json"), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    match verify_equivalence(args.seed, args.dim, args.vocab_size, args.trials, args.tolerance) {
        Ok(v) => {
            println!(
                "PASS: max deviation {:e} over {} trials (worst trial {}, tolerance {:e})",
                v.max_deviation, v.trials, v.worst_trial, args.tolerance
            );
            Ok(())
        }
        Err(TheoremError::Numeric(e)) => Err(Failure::usage(e.to_string())),
        Err(e @ TheoremError::Failed { .. }) => {
            println!("FAIL: {e}");
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPHERETOPIC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Train(a) => cmd_train(a),
        Command::Topics(a) => cmd_topics(a),
        Command::Eval(a) => cmd_eval(a),
        Command::VerifyTheorem(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
