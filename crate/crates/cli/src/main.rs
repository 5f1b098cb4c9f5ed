mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "simpeval", version, about = "Evaluation toolkit for sentence simplification outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, sample and join evaluation sets.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// String-based metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Inter-annotator agreement on Likert ratings.
    Agree(AgreeArgs),
    /// Aggregate tables over annotation records.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Metric meta-evaluation and significance testing.
    #[command(subcommand)]
    Metaeval(MetaevalCmd),
    /// Prompt grid search.
    #[command(subcommand)]
    Promptlab(PromptlabCmd),
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Evaluation set (JSONL or TSV).
    #[arg(long, alias = "eval-set")]
    input: PathBuf,
    /// Overrides the format guessed from the extension.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Subcommand)]
enum CorpusCmd {
    /// Parse and check an evaluation set; prints per-dataset counts.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        json: bool,
    },
    /// Seeded sample without replacement.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// uniform | per-dataset
        #[arg(long, default_value = "uniform")]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach system outputs to an evaluation set.
    Join {
        #[command(flatten)]
        input: InputArgs,
        /// JSONL of {"id", "system", "output"}.
        #[arg(long)]
        outputs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum MetricsCmd {
    /// Corpus scores for one system.
    Run {
        #[arg(long)]
        eval_set: PathBuf,
        /// Extra outputs file joined before scoring.
        #[arg(long)]
        outputs: Option<PathBuf>,
        #[arg(long)]
        system: String,
        #[arg(long, value_delimiter = ',', default_value = "sari,bleu,fkgl")]
        metrics: Vec<String>,
        /// Write the full report (with sentence scores) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write sentence-level SARI as score JSONL for `metaeval corr`.
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct AgreeArgs {
    #[arg(long)]
    ratings: PathBuf,
    /// overlap | icc
    #[arg(long, default_value = "icc")]
    stat: String,
    /// Defaults to all three dimensions.
    #[arg(long)]
    dimension: Option<String>,
    /// ICC form, e.g. "ICC(2,1)".
    #[arg(long, default_value = "ICC(2,1)")]
    form: String,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCmd {
    /// Tables over consensus error records.
    Errors {
        #[arg(long)]
        records: PathBuf,
        /// 6 | 7 | fig3 | unique
        #[arg(long, default_value = "6")]
        table: String,
        /// Column order; defaults to systems sorted by name.
        #[arg(long, value_delimiter = ',')]
        systems: Vec<String>,
        /// Use the n-1 denominator for `unique`.
        #[arg(long)]
        sample_sd: bool,
    },
    /// Mean Likert ratings per dataset, system and dimension.
    Ratings {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "8")]
        table: String,
        #[arg(long, value_delimiter = ',')]
        systems: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum MetaevalCmd {
    /// Derive binary labels from error records or ratings.
    Labels {
        #[arg(long, required_unless_present = "ratings", conflicts_with = "ratings")]
        records: Option<PathBuf>,
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// error_presence | quality_overall | quality_dimension:<dim>
        #[arg(long)]
        rule: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Point-biserial correlation of metric scores with binary labels.
    Corr {
        #[arg(long)]
        labels: PathBuf,
        /// Sentence-level scores JSONL (repeatable).
        #[arg(long, required = true)]
        scores: Vec<PathBuf>,
        /// all | system | exclude:<dataset> | system+exclude:<dataset> (repeatable).
        #[arg(long, default_value = "all")]
        slice: Vec<String>,
        #[arg(long)]
        downsample: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Paired randomization test of two systems under a corpus metric.
    Sigtest {
        #[arg(long)]
        eval_set: PathBuf,
        #[arg(long)]
        outputs: Option<PathBuf>,
        /// System A id.
        #[arg(long)]
        a: String,
        /// System B id.
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "sari")]
        metric: String,
        #[arg(long, default_value_t = simpeval_core::metaeval::DEFAULT_RESAMPLES)]
        resamples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerate all swap patterns instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum PromptlabCmd {
    /// List the prompt grid.
    Grid {
        #[arg(long)]
        json: bool,
    },
    /// Generate and score the grid on a validation set.
    Run {
        /// echo | replay:FILE | mock:FILE
        #[arg(long)]
        client: String,
        #[arg(long)]
        valid: PathBuf,
        /// Few-shot example manifest (JSONL of {"style", "id", "refs"?}).
        #[arg(long)]
        manifest: PathBuf,
        /// Evaluation set holding the example items; defaults to --valid.
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Directory with turk.txt, asset.txt, newsela.txt.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Only these specs (labels like asset/3/1); default is the full grid.
        #[arg(long, value_delimiter = ',')]
        specs: Vec<String>,
        #[arg(long, default_value_t = 4)]
        in_flight: usize,
        #[arg(long, default_value_t = 3)]
        max_attempts: usize,
        /// Decoding parameter passed to the client, key=value (repeatable).
        #[arg(long)]
        param: Vec<String>,
        /// Grid table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generated outputs, usable later with replay:FILE.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Pick the best spec from a grid table written by `run --out`.
    Select {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured port.
    #[arg(long)]
    port: Option<u16>,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
