use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use acdgen_core::config::{BackendKind, RunConfig};
use acdgen_core::corpus::{BioMode, InputFormat, SourceCorpus};
use acdgen_core::eval::ReportFormat;
use acdgen_core::tagcodec::DecodeMode;

mod commands;
mod failure;

use failure::Failure;

/// Generative argumentative component detection: corpus tools, prompting,
/// inference, alignment and evaluation.
#[derive(Debug, Parser)]
#[command(name = "acdgen", version)]
struct Cli {
    /// Run configuration (TOML). Flags below override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read standoff, BIO or canonical inputs and write one canonical JSONL file.
    Convert {
        /// Input file or directory; repeatable. Defaults to `corpus.inputs`.
        #[arg(long = "input", value_name = "PATH")]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "standoff")]
        format: FormatArg,
        #[arg(long, value_enum, default_value = "synthetic")]
        source: SourceArg,
        /// Output file; `-` for stdout. Defaults to `corpus.canonical`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// BIO tag and component counts per source corpus, with a check against
    /// published figures.
    Stats {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Seeded train/dev/test split into `train.jsonl`, `dev.jsonl`, `test.jsonl`.
    Split {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Defaults to `<output_dir>/split`.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Write instruction-tuning pairs as JSON lines.
    ExportTrain {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Defaults to `<output_dir>/train_pairs.jsonl`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Generate one transcript record per chunk. Re-running resumes.
    Predict {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Defaults to `<output_dir>/transcript.jsonl`.
        #[arg(long, value_name = "FILE")]
        transcript: Option<PathBuf>,
    },
    /// Align a transcript against the gold corpus and write reports.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Defaults to `<output_dir>/transcript.jsonl`.
        #[arg(long, value_name = "FILE")]
        transcript: Option<PathBuf>,
    },
    /// Re-render a written evaluation.
    Report {
        /// Directory holding `report.json`. Defaults to `output_dir`.
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "human")]
        format: ReportFormatArg,
    },
}

#[derive(Debug, Args)]
struct CorpusArg {
    /// Canonical JSONL corpus. Defaults to `corpus.canonical`, then to
    /// loading `corpus.inputs` directly.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
}

/// Overrides for run configuration fields.
#[derive(Debug, Args)]
#[command(next_help_heading = "Run configuration")]
struct Overrides {
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    bio_mode: Option<ModeArg>,
    #[arg(long, global = true)]
    template_version: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    template_file: Option<PathBuf>,
    #[arg(long, global = true)]
    budget_tokens: Option<usize>,
    #[arg(long, global = true)]
    safety_factor: Option<f64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, global = true)]
    backend_id: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long, global = true, value_name = "VAR")]
    api_key_env: Option<String>,
    #[arg(long, global = true)]
    timeout_secs: Option<u64>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true)]
    max_retries: Option<u32>,
    #[arg(long, global = true)]
    base_delay_ms: Option<u64>,
    /// Seed for the perturbing backend.
    #[arg(long, global = true)]
    backend_seed: Option<u64>,
    /// Transcript to answer from before calling the backend; repeatable.
    #[arg(long, global = true, value_name = "FILE")]
    replay: Vec<PathBuf>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    top_p: Option<f64>,
    #[arg(long, global = true)]
    max_output_tokens: Option<u32>,
    #[arg(long, global = true)]
    train: Option<f64>,
    #[arg(long, global = true)]
    dev: Option<f64>,
    #[arg(long, global = true)]
    test: Option<f64>,
    #[arg(long, global = true)]
    split_seed: Option<u64>,
    #[arg(long, global = true, value_name = "BOOL")]
    macro_with_o: Option<bool>,
    #[arg(long, global = true, value_name = "BOOL")]
    skip_zero_support: Option<bool>,
    #[arg(long, global = true)]
    jaccard_threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    decode_mode: Option<ModeArg>,
    /// Score whatever chunks have a generation instead of failing.
    #[arg(long, global = true)]
    allow_partial: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Standoff,
    Bio,
    Canonical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    #[value(name = "uselecdeb", alias = "uselecdeb60to16")]
    USElecDeb,
    #[value(name = "pe", alias = "persuasiveessays")]
    PersuasiveEssays,
    #[value(name = "wd", alias = "webdiscourse")]
    WebDiscourse,
    Synthetic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Gold,
    Echo,
    Perturb,
    Replay,
    Http,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormatArg {
    Human,
    Machine,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Standoff => InputFormat::Standoff,
            FormatArg::Bio => InputFormat::Bio,
            FormatArg::Canonical => InputFormat::Canonical,
        }
    }
}

impl From<SourceArg> for SourceCorpus {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::USElecDeb => SourceCorpus::USElecDeb60To16,
            SourceArg::PersuasiveEssays => SourceCorpus::PersuasiveEssays,
            SourceArg::WebDiscourse => SourceCorpus::WebDiscourse,
            SourceArg::Synthetic => SourceCorpus::Synthetic,
        }
    }
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Gold => BackendKind::Gold,
            BackendArg::Echo => BackendKind::Echo,
            BackendArg::Perturb => BackendKind::Perturb,
            BackendArg::Replay => BackendKind::Replay,
            BackendArg::Http => BackendKind::Http,
        }
    }
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(f: ReportFormatArg) -> Self {
        match f {
            ReportFormatArg::Human => ReportFormat::Human,
            ReportFormatArg::Machine => ReportFormat::Machine,
        }
    }
}

impl Overrides {
    fn apply(self, c: &mut RunConfig) {
        fn set<T>(slot: &mut T, value: Option<T>) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        set(&mut c.output_dir, self.output_dir);
        if let Some(m) = self.bio_mode {
            c.corpus.bio_mode = match m {
                ModeArg::Strict => BioMode::Strict,
                ModeArg::Lenient => BioMode::Lenient,
            };
        }
        set(&mut c.prompt.template_version, self.template_version);
        if self.template_file.is_some() {
            c.prompt.template_file = self.template_file;
        }
        set(&mut c.prompt.budget_tokens, self.budget_tokens);
        set(&mut c.prompt.safety_factor, self.safety_factor);

        let b = &mut c.backend;
        set(&mut b.kind, self.backend.map(Into::into));
        if self.backend_id.is_some() {
            b.backend_id = self.backend_id;
        }
        if self.endpoint.is_some() {
            b.endpoint = self.endpoint;
        }
        if self.model.is_some() {
            b.model = self.model;
        }
        if self.api_key_env.is_some() {
            b.api_key_env = self.api_key_env;
        }
        set(&mut b.timeout_secs, self.timeout_secs);
        set(&mut b.parallelism, self.parallelism);
        set(&mut b.max_retries, self.max_retries);
        set(&mut b.base_delay_ms, self.base_delay_ms);
        set(&mut b.seed, self.backend_seed);
        b.replay.extend(self.replay);

        set(&mut c.decoding.temperature, self.temperature);
        set(&mut c.decoding.top_p, self.top_p);
        set(&mut c.decoding.max_output_tokens, self.max_output_tokens);

        set(&mut c.split.train, self.train);
        set(&mut c.split.dev, self.dev);
        set(&mut c.split.test, self.test);
        set(&mut c.split.seed, self.split_seed);

        set(&mut c.eval.macro_with_o, self.macro_with_o);
        set(&mut c.eval.skip_zero_support, self.skip_zero_support);
        set(&mut c.eval.jaccard_threshold, self.jaccard_threshold);
        if let Some(m) = self.decode_mode {
            c.eval.decode_mode = match m {
                ModeArg::Strict => DecodeMode::Strict,
                ModeArg::Lenient => DecodeMode::Lenient,
            };
        }
        c.eval.allow_partial |= self.allow_partial;
    }
}

fn load_config(path: Option<&PathBuf>, overrides: Overrides) -> Result<RunConfig, Failure> {
    let mut config = match path {
        Some(p) => RunConfig::load(p).map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate().map_err(Failure::usage)?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(cli.config.as_ref(), cli.overrides)?;
    match cli.command {
        Command::Convert {
            inputs,
            format,
            source,
            output,
        } => commands::convert(&config, &inputs, format.into(), source.into(), output),
        Command::Stats { corpus, json } => commands::stats(&config, corpus.corpus, json),
        Command::Split { corpus, out_dir } => commands::split(&config, corpus.corpus, out_dir),
        Command::ExportTrain { corpus, output } => commands::export_train(&config, corpus.corpus, output),
        Command::Predict { corpus, transcript } => commands::predict(&config, corpus.corpus, transcript),
        Command::Evaluate { corpus, transcript } => commands::evaluate(&config, corpus.corpus, transcript),
        Command::Report { dir, format } => commands::report(&config, dir, format.into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(failure::USAGE);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
