use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meetsum::config::Config;
use meetsum::corpus::{load_corpus, Clustering, Meeting};
use meetsum::eval::{aggregate, LogBase};
use meetsum::learn::LinearModel;
use meetsum::pipeline::{
    cluster_corpus, clustering_report, cross_validate, parse_learner, summarize_meeting, train_da, train_pairwise,
    train_token, ClusterMethod, ClusterSource, ClusteringRecord, Summarizer, Workspace,
};
use meetsum::{Error, Result};

/// Decision summarization for meeting transcripts.
#[derive(Parser)]
#[command(name = "meetsum", version)]
struct Cli {
    /// JSON config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed. Falls back to DD_SEED, then the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Logarithm base for variation of information.
    #[arg(long, global = true, value_enum)]
    voi_base: Option<VoiBase>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VoiBase {
    E,
    #[value(name = "2")]
    Two,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a corpus file loads and passes validation.
    Validate { corpus: PathBuf },
    /// Cluster decision-related DAs and score the result against gold.
    Cluster(ClusterArgs),
    /// Train the pairwise same-decision classifier.
    TrainPairwise(TrainArgs),
    /// Train the DA-level extraction classifier.
    TrainDa(TrainArgs),
    /// Train the token-level extraction classifier.
    TrainToken(TrainArgs),
    /// Summarize clusters and score the summaries with ROUGE-1.
    Summarize(SummarizeArgs),
    /// Run k-fold cross-validation over meetings and print the full report.
    Xval(XvalArgs),
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    method: String,
    /// Stopping threshold; defaults to the method's tuned value.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Pairwise model for the supervised methods.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Train LDA or pairwise models on the other folds for each meeting.
    #[arg(long)]
    xval: bool,
    /// Write per-meeting clusterings here as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// svm or maxent.
    #[arg(long, default_value = "svm")]
    learner: String,
    /// Context DAs added to each cluster (DA and token models only).
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// "gold", or a JSON-lines file written by `cluster --out`.
    #[arg(long, default_value = "gold")]
    clusters: String,
    /// longest, prototype, da, token or upper-bound.
    #[arg(long)]
    summarizer: String,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    context: Option<usize>,
    /// Compare words by Porter stem when scoring.
    #[arg(long)]
    stem_match: bool,
    /// Write per-decision summaries here as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct XvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let env_seed = match std::env::var("DD_SEED") {
        Ok(v) => Some(
            v.trim().parse::<u64>().map_err(|_| Error::InvalidArgument(format!("DD_SEED is not an integer: {v}")))?,
        ),
        Err(_) => None,
    };
    if let Some(seed) = cli.seed.or(env_seed) {
        config.seed = seed;
    }
    if let Some(base) = cli.voi_base {
        config.voi_base = match base {
            VoiBase::E => LogBase::Natural,
            VoiBase::Two => LogBase::Two,
        };
    }
    config.check()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Validate { corpus } => {
            let meetings = load_corpus(&corpus)?;
            let das: usize = meetings.iter().map(Meeting::len).sum();
            eprintln!("ok: {} meetings, {das} dialogue acts", meetings.len());
            Ok(())
        }
        Command::Cluster(args) => {
            let meetings = load_corpus(&args.corpus)?;
            let method: ClusterMethod = args.method.parse()?;
            if let Some(t) = args.threshold {
                if t.is_nan() {
                    return Err(Error::InvalidArgument("threshold is NaN".into()));
                }
            }
            let model = args.model.as_deref().map(load_model).transpose()?;
            let ws = Workspace::new(&meetings, config)?;
            let seed = ws.config.seed;
            let records = cluster_corpus(&ws, &meetings, method, args.threshold, model.as_ref(), args.xval, seed)?;
            if let Some(out) = &args.out {
                write_lines(out, &records)?;
            }
            let report = clustering_report(&ws, &meetings, method, &records)?;
            print_json(&report)
        }
        Command::TrainPairwise(args) => {
            train_command(args, config, |ws, ms, kind, _, seed| train_pairwise(ws, ms, kind, seed))
        }
        Command::TrainDa(args) => train_command(args, config, train_da),
        Command::TrainToken(args) => train_command(args, config, train_token),
        Command::Summarize(args) => {
            if args.stem_match {
                config.rouge.stem = true;
            }
            let meetings = load_corpus(&args.corpus)?;
            let context_n = args.context.unwrap_or(0);
            let model = args.model.as_deref().map(load_model).transpose()?;
            let summarizer = match (args.summarizer.as_str(), &model) {
                ("longest", _) => Summarizer::Longest,
                ("prototype", _) => Summarizer::Prototype,
                ("upper-bound", _) => Summarizer::UpperBound,
                ("da", Some(m)) => Summarizer::Da(m),
                ("token", Some(m)) => Summarizer::Token(m),
                ("da" | "token", None) => {
                    return Err(Error::InvalidArgument(format!("the {} summarizer needs --model", args.summarizer)))
                }
                (other, _) => return Err(Error::InvalidArgument(format!("unknown summarizer '{other}'"))),
            };
            let system = match args.clusters.as_str() {
                "gold" => None,
                path => Some(read_clusterings(Path::new(path))?),
            };
            let ws = Workspace::new(&meetings, config)?;
            let mut outputs = Vec::new();
            for m in &meetings {
                let ma = ws.analyze(m);
                let source = match &system {
                    None => ClusterSource::Gold,
                    Some(map) => match map.get(&m.id) {
                        Some(c) => ClusterSource::System(c),
                        None => {
                            return Err(Error::InvalidArgument(format!("no clustering given for meeting {}", m.id)))
                        }
                    },
                };
                outputs.extend(summarize_meeting(&ws, &ma, source, summarizer, context_n)?);
            }
            if let Some(out) = &args.out {
                write_lines(out, &outputs)?;
            }
            let scores: Vec<_> = outputs.iter().map(|o| o.rouge).collect();
            let report = serde_json::json!({
                "summarizer": summarizer.name(),
                "clusters": args.clusters,
                "context_n": context_n,
                "rouge": aggregate(&scores)?,
            });
            print_json(&report)
        }
        Command::Xval(args) => {
            if let Some(k) = args.folds {
                config.folds = k;
            }
            config.check()?;
            let meetings = load_corpus(&args.corpus)?;
            let seed = config.seed;
            let report = cross_validate(&meetings, config, seed)?;
            let text = match args.format {
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
                Format::Text => report.render_text(),
            };
            match &args.out {
                Some(path) => fs::write(path, text).map_err(|source| Error::Io { path: path.clone(), source }),
                None => write_stdout(&text),
            }
        }
    }
}

fn train_command<F>(args: TrainArgs, config: Config, trainer: F) -> Result<()>
where
    F: Fn(&Workspace, &[&Meeting], meetsum::learn::ModelKind, usize, u64) -> Result<LinearModel>,
{
    let meetings = load_corpus(&args.corpus)?;
    let kind = parse_learner(&args.learner)?;
    let context_n = args.context.unwrap_or(config.context_n);
    let ws = Workspace::new(&meetings, config)?;
    let refs: Vec<&Meeting> = meetings.iter().collect();
    let model = trainer(&ws, &refs, kind, context_n, ws.config.seed)?;
    fs::write(&args.out, model.to_json()? + "\n").map_err(|source| Error::Io { path: args.out.clone(), source })?;
    eprintln!("wrote {} model with {} features to {}", model.kind, model.feature_names.len(), args.out.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<LinearModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    LinearModel::from_json(&text)
}

fn read_clusterings(path: &Path) -> Result<BTreeMap<String, Clustering>> {
    let file = fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ClusteringRecord =
            serde_json::from_str(&line).map_err(|source| Error::Parse { line: i + 1, source })?;
        out.insert(record.meeting_id, record.clusters);
    }
    Ok(out)
}

fn write_lines<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    write_stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn write_stdout(text: &str) -> Result<()> {
    io::stdout().write_all(text.as_bytes()).map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source })
}
