//! `hyperank`: every pipeline stage as a subcommand with file artifacts.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod commands;
mod embedder;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use embedder::EmbedderArgs;

#[derive(Parser, Debug)]
#[command(name = "hyperank", version, about = "Financial hypernym ranking pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expand a labeled term file with acronym, DBpedia, glossary and external records.
    Augment(AugmentArgs),
    /// Query the DBpedia lookup service for every term, caching raw responses.
    FetchDbpedia(FetchArgs),
    /// Split records into dev and val sets by original term.
    Split(SplitArgs),
    /// Generate graded (term, definition, score) pairs from the taxonomy.
    Negsample(NegsampleArgs),
    /// Write an embedding file for every text the pipeline needs.
    Embed(EmbedArgs),
    /// Fit a projection head on scored pairs.
    Train(TrainArgs),
    /// Score records against every label definition and roll up variants.
    Rank(RankArgs),
    /// Average similarity matrices from several models.
    Ensemble(EnsembleArgs),
    /// Accuracy and mean rank with a rank cutoff, plus the per-label table.
    Evaluate(EvaluateArgs),
    /// Reference rankers.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// 2-D PCA of label definition embeddings.
    Pca(PcaArgs),
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Term file (CSV `term,label`).
    #[arg(long)]
    terms: PathBuf,
    /// Plain-text documents scanned for parenthesized acronyms.
    #[arg(long = "acronym-doc")]
    acronym_docs: Vec<PathBuf>,
    /// Extra acronym entries (CSV `acronym,expansion`).
    #[arg(long)]
    acronyms: Option<PathBuf>,
    /// English word list, one per line; acronyms spelling a listed word are dropped.
    #[arg(long)]
    english: Option<PathBuf>,
    /// DBpedia lookup cache written by `fetch-dbpedia`.
    #[arg(long)]
    dbpedia_cache: Option<PathBuf>,
    /// Investopedia glossary (CSV `term,definition`).
    #[arg(long)]
    investopedia: Option<PathBuf>,
    /// FIBO glossary (CSV `term,definition`).
    #[arg(long)]
    fibo: Option<PathBuf>,
    /// External labeled terms (CSV `term,label`).
    #[arg(long)]
    external: Option<PathBuf>,
    /// Augmented records (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Per-source record counts (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FetchArgs {
    /// Records (JSON lines) or a term CSV; labeled terms are queried.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "https://lookup.dbpedia.org/api/search")]
    endpoint: String,
    /// Cache of raw responses (JSON lines), created if absent.
    #[arg(long)]
    cache: PathBuf,
    /// Terms whose lookup failed, one per line.
    #[arg(long)]
    errors: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    dev_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dev_out: PathBuf,
    #[arg(long)]
    val_out: PathBuf,
}

#[derive(Args, Debug)]
struct NegsampleArgs {
    /// Labeled records (JSON lines) or a term CSV.
    #[arg(long)]
    records: PathBuf,
    /// Label hierarchy (JSON).
    #[arg(long)]
    taxonomy: PathBuf,
    /// Proximity unit: same root scores k, same first child 2k.
    #[arg(long, default_value_t = hyperank::negsampler::DEFAULT_K)]
    k: f64,
    #[arg(long, default_value_t = hyperank::negsampler::DEFAULT_NEG_PER_TERM)]
    neg_per_term: usize,
    /// Zero-score pairs to keep: an integer count or a fraction such as `0.25`.
    /// All are kept when absent.
    #[arg(long)]
    zero_keep: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pairs (TSV `text_a,text_b,score,origin_id`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["hash_dim", "base"]))]
struct EmbedArgs {
    /// Records whose `text` fields are embedded.
    #[arg(long)]
    records: Vec<PathBuf>,
    /// Pair files whose two text columns are embedded.
    #[arg(long)]
    pairs: Vec<PathBuf>,
    /// Taxonomy whose label definitions are embedded.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Use the character-trigram hashing embedder with this dimension.
    #[arg(long)]
    hash_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Copy rows from an existing embedding file; every needed text must be present.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    Alternate,
    Sum,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairObjectiveArg {
    Contrastive,
    Regression,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Online contrastive margin on cosine distance.
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// Ranking loss similarity scale.
    #[arg(long, default_value_t = 20.0)]
    scale: f64,
    /// Pairs scoring at least this are positives for the contrastive loss.
    #[arg(long, default_value_t = 0.5)]
    positive_threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dimension; defaults to the base dimension.
    #[arg(long)]
    dim_out: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Alternate)]
    schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = PairObjectiveArg::Contrastive)]
    pair_objective: PairObjectiveArg,
    /// Model file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch mean losses (CSV).
    #[arg(long)]
    loss_report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[command(flatten)]
    embedder: EmbedderArgs,
    /// Projection model; raw base cosine when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Similarity matrix (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Ranked labels (CSV).
    #[arg(long)]
    ranked: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long = "matrix", required = true, num_args = 1..)]
    matrices: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ranked: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["ranked", "matrix"]))]
struct EvaluateArgs {
    /// Ranked labels (CSV).
    #[arg(long)]
    ranked: Option<PathBuf>,
    /// Similarity matrix (JSON), ranked before scoring.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Gold labels: records (JSON lines) or a term CSV.
    #[arg(long)]
    gold: PathBuf,
    /// Taxonomy, needed for the per-label table.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long, default_value_t = hyperank::eval::DEFAULT_CUTOFF)]
    cutoff: usize,
    /// Report (JSON); printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-label table (CSV).
    #[arg(long)]
    per_label: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BaselineCommand {
    /// Rank labels by cosine distance between raw term and label vectors.
    Distance(DistanceArgs),
    /// Multinomial logistic regression over term vectors.
    Logreg(LogregArgs),
}

#[derive(Args, Debug)]
struct DistanceArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[command(flatten)]
    embedder: EmbedderArgs,
    /// Average token vectors instead of embedding whole texts.
    #[arg(long)]
    token_level: bool,
    /// Embed label names rather than definitions.
    #[arg(long)]
    label_names: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LogregArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[arg(long)]
    token_level: bool,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    /// Fitted classifier (JSON).
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PcaArgs {
    #[arg(long)]
    taxonomy: PathBuf,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("HYPERANK_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| anyhow::anyhow!("HYPERANK_THREADS=`{raw}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// The error chain, skipping causes already quoted by an outer message.
fn render(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(2)
        }
    }
}
