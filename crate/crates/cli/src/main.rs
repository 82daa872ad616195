//! cantrack: synthetic multi-camera person tracking from the command line.
//!
//! `generate` writes a dataset from a world description, `train` fits the
//! scoring net, `track` runs the two-stage tracker, `evaluate` scores a
//! run against ground truth. Every command is deterministic given its
//! inputs, config, and seed. Set `CANTRACK_LOG=info` (or `debug`) for
//! progress on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cantrack_core::Error;
use config::{Mode, RunConfig};

mod config;
mod data;
mod evaluate;
mod generate;
mod track;
mod train;

#[derive(Parser)]
#[command(name = "cantrack", version, about = "Multi-camera person tracking on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset: detections, features, ground truth.
    Generate {
        /// World description JSON.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Directory for the three dataset files.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides the seed in the world description.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the scoring net to a labeled dataset.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Continue a previous run from its model file.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Run the tracker and write trajectories plus the decision log.
    Track {
        #[command(flatten)]
        common: CommonArgs,
        /// Within-camera association window, in frames.
        #[arg(long)]
        window: Option<u64>,
        /// Within-camera match threshold.
        #[arg(long)]
        tau_sct: Option<f64>,
        /// Cross-camera merge threshold.
        #[arg(long)]
        tau_ict: Option<f64>,
        /// Caps worker threads for pair scoring.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Score a tracker run against ground truth, or diff two reports.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Two report files to diff; deltas are A minus B.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        compare: Option<Vec<PathBuf>>,
    },
}

/// Flags shared by the commands that take a run configuration. Flags win
/// over values from the file.
#[derive(Args)]
struct CommonArgs {
    /// Run configuration JSON.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// How gallery detections are pooled: learned weights or uniform.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl CommonArgs {
    fn merged(&self) -> cantrack_core::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> cantrack_core::Result<()> {
    match cli.command {
        Command::Generate { config, out, seed } => generate::run(&config, &out, seed),
        Command::Train { common, resume } => {
            let cfg = common.merged()?;
            train::run(&cfg, resume.as_deref())
        }
        Command::Track { common, window, tau_sct, tau_ict, threads } => {
            let mut cfg = common.merged()?;
            if let Some(w) = window {
                cfg.window = w;
            }
            if let Some(t) = tau_sct {
                cfg.tau_sct = t;
            }
            if let Some(t) = tau_ict {
                cfg.tau_ict = t;
            }
            cfg.validate()?;
            track::run(&cfg, threads)
        }
        Command::Evaluate { common, compare } => {
            let cfg = common.merged()?;
            match compare.as_deref() {
                Some([a, b]) => evaluate::compare(a, b),
                Some(_) => unreachable!("clap enforces exactly two values"),
                None => evaluate::run(&cfg),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CANTRACK_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive as "errors" but must exit 0.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match &e {
                Error::Invalid(_) | Error::Shape(_) | Error::Parse { .. } => 1,
                Error::Io { .. } => 2,
                Error::Internal(_) => 3,
            })
        }
    }
}
