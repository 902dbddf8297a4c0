//! `segwords`: synthesize, prepare, train, segment, evaluate and sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod store;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "segwords", version, about = "Supervised word boundary detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that read a run configuration.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArgs {
    /// Run configuration (TOML). Flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub frame_ms: Option<f64>,
    #[arg(long)]
    pub tolerance_ms: Option<f64>,
    #[arg(long)]
    pub aug_radius: Option<usize>,
    /// Begin-cluster selection: first, mid or last.
    #[arg(long)]
    pub selection: Option<String>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Average per-utterance rates instead of pooling counts.
    #[arg(long = "macro")]
    pub macro_avg: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for segwords::corpus::Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Self::Train,
            SplitArg::Val => Self::Val,
            SplitArg::Test => Self::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepAxis {
    AugRadius,
    Selection,
    Tolerance,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus (WAVs, annotations, manifest).
    Synth {
        /// Corpus description (TOML); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Standardize, label and featurize a manifest.
    Prepare {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Annotation CSV. Without it each WAV needs a sibling `.wrd` file.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the baseline classifier on a prepared directory.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        prepared: PathBuf,
        /// Model output path.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch training log (CSV); defaults to `<out>.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Predict word boundaries from a model or from interchange logits.
    Segment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, requires = "model", conflicts_with = "logits")]
        prepared: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory of `.wseg` logits files.
        #[arg(long)]
        logits: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Boundary CSV output.
        #[arg(long)]
        out: PathBuf,
        /// Optional segment cut-list CSV.
        #[arg(long)]
        segments: Option<PathBuf>,
        /// Also write the model's logits as interchange files here.
        #[arg(long)]
        write_logits: Option<PathBuf>,
    },
    /// Score predicted boundaries against references.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Boundary CSV (`utterance_id,time_s`).
        #[arg(long, required_unless_present = "from_rates")]
        pred: Option<PathBuf>,
        /// Annotation CSV or boundary CSV.
        #[arg(long, required_unless_present = "from_rates")]
        refs: Option<PathBuf>,
        /// Compose F/R from `prc,rcl,os` directly.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from_rates: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the report as a CSV row with header.
        #[arg(long)]
        csv: bool,
    },
    /// Tabulate scores across one configuration axis.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        prepared: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values; a default list is used when omitted.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("SEGWORDS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { spec, out } => commands::synth::run(spec.as_deref(), &out),
        Command::Prepare {
            cfg,
            manifest,
            annotations,
            out,
        } => commands::prepare::run(&cfg, &manifest, annotations.as_deref(), &out),
        Command::Train {
            cfg,
            prepared,
            out,
            log,
        } => commands::train::run(&cfg, &prepared, &out, log.as_deref()),
        Command::Segment {
            cfg,
            prepared,
            model,
            logits,
            split,
            out,
            segments,
            write_logits,
        } => commands::segment::run(
            &cfg,
            commands::segment::Source::new(prepared, model, logits)?,
            split.into(),
            &out,
            segments.as_deref(),
            write_logits.as_deref(),
        ),
        Command::Eval {
            cfg,
            pred,
            refs,
            from_rates,
            out,
            csv,
        } => commands::eval::run(&cfg, pred.as_deref(), refs.as_deref(), from_rates, out.as_deref(), csv),
        Command::Sweep {
            cfg,
            prepared,
            axis,
            values,
            split,
            out,
        } => commands::sweep::run(&cfg, &prepared, axis, values.as_deref(), split.into(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
