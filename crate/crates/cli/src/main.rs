//! `nclm` command-line front end.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nclm::bench::{run_bench, BenchConfig};
use nclm::corpus::{build_vocabs, default_stopwords, load_corpus_auto, load_stopwords, EncodedCorpus, RawCorpus};
use nclm::evalkit::{
    export_features, features_to_csv, features_to_jsonl, lm_perplexity, load_features, npmi_coherence,
    retrieval_eval, CoherenceConfig, MetricsReport, Reference, RetrievalSummary,
};
use nclm::model::generate_sentences;
use nclm::nlm::{Variant, VariantKind};
use nclm::topics::topic_report;
use nclm::trainer::{sweep, train, Checkpoint, Precision, TrainConfig, TrainData};

#[derive(Parser)]
#[command(name = "nclm", version, about = "Composite topic + LSTM language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build both vocabularies from a corpus and write them as JSON.
    Prep(PrepArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Two-stage ablation over alpha (LTA) then topN (ETA).
    Sweep(SweepArgs),
    /// Perplexity, and optionally coherence and retrieval, as a JSON report.
    Eval(EvalArgs),
    /// Top words of every topic.
    Topics(TopicsArgs),
    /// NPMI coherence of the topics against a reference corpus.
    Coherence(CoherenceArgs),
    /// Greedy topic-conditioned sentence generation.
    Generate(GenerateArgs),
    /// Per-document feature table (CSV or JSONL by extension of --out).
    Features(FeaturesArgs),
    /// Precision@k retrieval between two labelled feature tables.
    Retrieve(RetrieveArgs),
    /// Per-sentence training time against sentence length.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(alias = "LSTM", alias = "lstm-lm")]
    Lstm,
    #[value(alias = "LTA")]
    Lta,
    #[value(alias = "ETA")]
    Eta,
    #[value(alias = "LETA")]
    Leta,
}

impl From<VariantArg> for VariantKind {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Lstm => VariantKind::LstmLm,
            VariantArg::Lta => VariantKind::Lta,
            VariantArg::Eta => VariantKind::Eta,
            VariantArg::Leta => VariantKind::Leta,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

/// Settings shared by `train` and `sweep`; flags override the config file.
#[derive(Args)]
struct ConfigArgs {
    /// JSON training config; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training corpus (text or .jsonl).
    #[arg(long)]
    corpus: PathBuf,
    /// Validation corpus; without it the tail of --corpus is held out.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// word2vec text embeddings for input and topic-term vectors.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Stopword list, one token per line (default: built-in English list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Add sentence-level topics.
    #[arg(long)]
    sdt: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    topn: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Config whose `vocab` thresholds are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Output JSON (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.1, 0.01])]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 40])]
    topns: Vec<usize>,
    /// Report JSON (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Evaluation corpus.
    #[arg(long, alias = "test")]
    corpus: PathBuf,
    /// Reference corpus for topic coherence.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Labelled corpus of retrieval candidates; --corpus documents are the queries.
    #[arg(long)]
    retrieval_train: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10])]
    ks: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Words per topic.
    #[arg(long, default_value_t = 10)]
    topn: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoherenceArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Reference corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 15, 20])]
    top_counts: Vec<usize>,
    /// Count co-occurrence in sliding windows of this many tokens.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Topic index to condition on, or `none`.
    #[arg(long, default_value = "none")]
    topic: String,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// `.jsonl` writes JSONL, anything else CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Feature table of the candidates.
    #[arg(long)]
    train: PathBuf,
    /// Feature table of the queries.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10])]
    ks: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Leta)]
    variant: VariantArg,
    #[arg(long)]
    sdt: bool,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 16, 32])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<nclm::Error> for Failure {
    fn from(e: nclm::Error) -> Self {
        match e {
            nclm::Error::Schema(_) | nclm::Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn require(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("no such file: {}", path.display())))
    }
}

fn require_opt(path: Option<&PathBuf>) -> CliResult {
    path.map_or(Ok(()), |p| require(p))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn stopwords(path: Option<&PathBuf>) -> CliResult<BTreeSet<String>> {
    Ok(match path {
        Some(p) => load_stopwords(p)?,
        None => default_stopwords(),
    })
}

fn corpus(path: &Path) -> CliResult<RawCorpus> {
    require(path)?;
    Ok(load_corpus_auto(path)?)
}

fn resolve_config(a: &ConfigArgs) -> CliResult<TrainConfig> {
    require_opt(a.config.as_ref())?;
    let mut c = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(v) = a.variant {
        c.variant.kind = v.into();
        c.variant.sdt = false;
    }
    if a.sdt {
        c.variant.sdt = true;
    }
    if let Some(x) = a.alpha {
        c.alpha = x;
    }
    if let Some(n) = a.topn {
        c.top_n = n;
    }
    if let Some(k) = a.k {
        c.topics = k;
    }
    if let Some(p) = a.precision {
        c.precision = match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        };
    }
    c.check()?;
    Ok(c)
}

fn train_data(a: &ConfigArgs, config: &TrainConfig) -> CliResult<TrainData> {
    require_opt(a.valid.as_ref())?;
    require_opt(a.embeddings.as_ref())?;
    require_opt(a.stopwords.as_ref())?;
    let train = corpus(&a.corpus)?;
    let valid = a.valid.as_deref().map(load_corpus_auto).transpose()?;
    Ok(TrainData::prepare(
        config,
        train,
        valid,
        a.embeddings.as_deref(),
        stopwords(a.stopwords.as_ref())?,
    )?)
}

fn load_ckpt(path: &Path) -> CliResult<Checkpoint> {
    require(path)?;
    Ok(Checkpoint::load(path)?)
}

fn prep(a: PrepArgs) -> CliResult {
    require_opt(a.config.as_ref())?;
    require_opt(a.stopwords.as_ref())?;
    let config = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let raw = corpus(&a.corpus)?;
    let vocab = build_vocabs(&raw, &config.vocab, stopwords(a.stopwords.as_ref())?)?;
    log::info!("prep nlm_vocab={} ntm_vocab={}", vocab.nlm.len(), vocab.ntm.len());
    let report = json!({
        "nlm_hash": vocab.nlm.hash(),
        "ntm_hash": vocab.ntm.hash(),
        "nlm": vocab.nlm.tokens(),
        "ntm": vocab.ntm.tokens(),
    });
    emit(a.out.as_deref(), &to_json(&report))
}

fn train_cmd(a: TrainArgs) -> CliResult {
    let config = resolve_config(&a.cfg)?;
    let data = train_data(&a.cfg, &config)?;
    log::info!(
        "train variant={} docs={} valid_docs={} nlm_vocab={} ntm_vocab={}",
        config.variant.label(),
        data.train.len(),
        data.valid.len(),
        data.vocab.nlm.len(),
        data.vocab.ntm.len()
    );
    let ckpt = train(&config, &data)?;
    ckpt.save(&a.out)?;
    let p = &ckpt.header.progress;
    let summary = json!({
        "checkpoint": a.out.display().to_string(),
        "variant": config.variant.label(),
        "best_epoch": p.best_epoch,
        "best_valid_perplexity": p.best_valid_perplexity,
    });
    emit(None, &to_json(&summary))
}

fn sweep_cmd(a: SweepArgs) -> CliResult {
    let config = resolve_config(&a.cfg)?;
    let data = train_data(&a.cfg, &config)?;
    let report = sweep(&config, &data, &a.alphas, &a.topns)?;
    emit(a.out.as_deref(), &to_json(&report))
}

fn eval_cmd(a: EvalArgs) -> CliResult {
    let ckpt = load_ckpt(&a.ckpt)?;
    let vocab = ckpt.vocab()?;
    let max_len = ckpt.header.config.max_seq_len;
    let test = EncodedCorpus::encode(&corpus(&a.corpus)?, &vocab);
    let mut report = MetricsReport {
        perplexity: Some(lm_perplexity(&ckpt.model, &test, &vocab, max_len)?),
        ..Default::default()
    };
    if let Some(r) = &a.reference {
        if !ckpt.model.variant().uses_topics() {
            return Err(Failure::Usage("coherence needs a topic-aware variant".into()));
        }
        let cfg = CoherenceConfig::default();
        let n = cfg.top_counts.iter().copied().max().unwrap_or(1);
        let topics = topic_report(&ckpt.model.ntm.topic_word, &vocab.ntm, n);
        let reference = Reference::build(&corpus(r)?, cfg.window)?;
        report.coherence = Some(npmi_coherence(&topics, &reference, &cfg)?);
    }
    if let Some(t) = &a.retrieval_train {
        let pool = EncodedCorpus::encode(&corpus(t)?, &vocab);
        let train_rows = export_features(&ckpt.model, &pool, &vocab)?;
        let query_rows = export_features(&ckpt.model, &test, &vocab)?;
        let r = retrieval_eval(&train_rows, &query_rows, &a.ks)?;
        report.retrieval = Some(RetrievalSummary { p_at_k: r.p_at_k });
    }
    emit(a.out.as_deref(), &to_json(&report))
}

fn topics_cmd(a: TopicsArgs) -> CliResult {
    let ckpt = load_ckpt(&a.ckpt)?;
    if a.topn == 0 {
        return Err(Failure::Usage("--topn must be positive".into()));
    }
    let vocab = ckpt.vocab()?;
    let topics = topic_report(&ckpt.model.ntm.topic_word, &vocab.ntm, a.topn);
    let text = match a.format {
        ReportFormat::Json => to_json(&json!({ "topics": topics })),
        ReportFormat::Text => topics
            .iter()
            .enumerate()
            .map(|(k, words)| format!("topic {k}: {}\n", words.join(" ")))
            .collect(),
    };
    emit(a.out.as_deref(), &text)
}

fn coherence_cmd(a: CoherenceArgs) -> CliResult {
    let ckpt = load_ckpt(&a.ckpt)?;
    let cfg = CoherenceConfig {
        top_counts: a.top_counts,
        window: a.window,
        ..Default::default()
    };
    cfg.validate()?;
    let vocab = ckpt.vocab()?;
    let n = *cfg.top_counts.last().expect("validated non-empty");
    let topics = topic_report(&ckpt.model.ntm.topic_word, &vocab.ntm, n);
    let reference = Reference::build(&corpus(&a.corpus)?, cfg.window)?;
    let report = npmi_coherence(&topics, &reference, &cfg)?;
    emit(a.out.as_deref(), &to_json(&report))
}

fn generate_cmd(a: GenerateArgs) -> CliResult {
    let ckpt = load_ckpt(&a.ckpt)?;
    let topic = match a.topic.as_str() {
        "none" => None,
        k => Some(
            k.parse::<usize>()
                .map_err(|_| Failure::Usage(format!("--topic expects an index or `none`, got {k:?}")))?,
        ),
    };
    if let Some(k) = topic {
        let topics = ckpt.model.ntm.topics();
        if k >= topics || !ckpt.model.variant().uses_topics() {
            return Err(Failure::Usage(format!("topic {k} out of range for this model ({topics} topics)")));
        }
    }
    let vocab = ckpt.vocab()?;
    let sentences = generate_sentences(&ckpt.model, &vocab, topic, None, a.count, a.max_len, a.seed)?;
    let text: String = sentences.iter().map(|s| s.join(" ") + "\n").collect();
    emit(a.out.as_deref(), &text)
}

fn features_cmd(a: FeaturesArgs) -> CliResult {
    let ckpt = load_ckpt(&a.ckpt)?;
    let vocab = ckpt.vocab()?;
    let docs = EncodedCorpus::encode(&corpus(&a.corpus)?, &vocab);
    let rows = export_features(&ckpt.model, &docs, &vocab)?;
    let text = match a.out.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => features_to_jsonl(&rows),
        _ => features_to_csv(&rows),
    };
    fs::write(&a.out, text)?;
    log::info!("features rows={} out={}", rows.len(), a.out.display());
    Ok(())
}

fn retrieve_cmd(a: RetrieveArgs) -> CliResult {
    require(&a.train)?;
    require(&a.test)?;
    let train_rows = load_features(&a.train)?;
    let test_rows = load_features(&a.test)?;
    let result = retrieval_eval(&train_rows, &test_rows, &a.ks)?;
    emit(a.out.as_deref(), &to_json(&result))
}

fn bench_cmd(a: BenchArgs) -> CliResult {
    let cfg = BenchConfig {
        variant: Variant::new(a.variant.into(), a.sdt)?,
        sizes: a.sizes,
        repetitions: a.repetitions,
        seed: a.seed,
        ..Default::default()
    };
    let rows = run_bench(&cfg)?;
    let ratio = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) if rows.len() > 1 => Some(l.seconds_per_sentence / f.seconds_per_sentence),
        _ => None,
    };
    emit(a.out.as_deref(), &to_json(&json!({ "rows": rows, "ratio_last_to_first": ratio })))
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(
                buf,
                "ts={} level={} target={} {}",
                buf.timestamp_millis(),
                record.level(),
                record.target(),
                record.args()
            )
        })
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging();
    let result = match cli.command {
        Command::Prep(a) => prep(a),
        Command::Train(a) => train_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Topics(a) => topics_cmd(a),
        Command::Coherence(a) => coherence_cmd(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Features(a) => features_cmd(a),
        Command::Retrieve(a) => retrieve_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
