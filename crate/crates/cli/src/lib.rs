//! Command-line front end: config loading, task definitions and the
//! subcommands behind the `pianojudge` binary.

pub mod commands;
pub mod config;
pub mod task;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Command, CliError};
use crate::config::{ConfigError, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "pianojudge", version, about = "Piano performance ranking, difficulty and technique experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate manifests and assign train/test splits
    Ingest(Common),
    /// Download remote audio through the configured downloader
    Fetch(Common),
    /// Compute or import segment embeddings into the cache
    Embed(Common),
    /// Write labeled pair lists for a ranking task
    Pair(Common),
    /// Train a prediction head
    Train(Common),
    /// Score a trained head on the test split
    Evaluate(Common),
    /// Run the all-pairs tournament over competition candidates
    Tournament(Common),
    /// Competition case study, optionally fitting the head on half the candidates
    CaseStudy(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// INI run configuration
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    task: Option<String>,
    /// Working sample rate; computed backends only run at 24000 Hz
    #[arg(long)]
    sample_rate: Option<u32>,
}

fn check_sample_rate(cfg: &RunConfig, rate: Option<u32>) -> Result<(), ConfigError> {
    let Some(rate) = rate else { return Ok(()) };
    if cfg.backend == pianojudge::embeddings::SPECTROGRAM {
        return Err(ConfigError::new(
            "sample_rate",
            "not accepted for the spectrogram backend (fixed at 24000 Hz)",
        ));
    }
    if rate != pianojudge::audio::WORKING_SAMPLE_RATE {
        return Err(ConfigError::new("sample_rate", format!("{rate} Hz is not supported; audio is resampled to 24000 Hz")));
    }
    Ok(())
}

/// Parse arguments, run the command and return the process exit code:
/// 0 on success, 2 for usage or config errors, 1 for anything else.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, common) = match cli.command {
        Cmd::Ingest(c) => (Command::Ingest, c),
        Cmd::Fetch(c) => (Command::Fetch, c),
        Cmd::Embed(c) => (Command::Embed, c),
        Cmd::Pair(c) => (Command::Pair, c),
        Cmd::Train(c) => (Command::Train, c),
        Cmd::Evaluate(c) => (Command::Evaluate, c),
        Cmd::Tournament(c) => (Command::Tournament, c),
        Cmd::CaseStudy(c) => (Command::CaseStudy, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        backend: common.backend,
        task: common.task,
    };
    let sample_rate = common.sample_rate;
    let result = RunConfig::load(&common.config, &overrides)
        .and_then(|cfg| check_sample_rate(&cfg, sample_rate).map(|()| cfg))
        .map_err(CliError::from)
        .and_then(|cfg| commands::run(command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
