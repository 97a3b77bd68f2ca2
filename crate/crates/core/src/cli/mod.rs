//! The `pose2gaze` command line: one subcommand per pipeline stage, each
//! driven by a TOML run config with flag overrides.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{
    AblateSection, AnalysisSection, DataSection, EvalSection, EvalSplit, ModelSection, RunConfig,
    SynthSection, TrainSection,
};

use crate::error::Result;
use crate::motiondata::Setting;

#[derive(Debug, Parser)]
#[command(
    name = "pose2gaze",
    version,
    about = "Gaze generation from head and body motion"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// past, present or future.
    #[arg(long, global = true)]
    pub setting: Option<Setting>,
    /// mogaze21, gimo23, genericN or custom:PATH.
    #[arg(long, global = true)]
    pub skeleton: Option<String>,
    /// Recording manifest or directory; repeatable. Replaces data.recordings.
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Vec<PathBuf>,
    /// Checkpoint for eval and predict.
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate synthetic recordings.
    Synth,
    /// Coordination tables, lag curves and gaze-in-head statistics.
    Analyze,
    /// Train a model and write a checkpoint with its history.
    Train,
    /// Evaluate a checkpoint against the head-direction baseline.
    Eval,
    /// Write per-window predicted gaze.
    Predict,
    /// Train and evaluate every ablation variant.
    Ablate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Analyze => "analyze",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Predict => "predict",
            Command::Ablate => "ablate",
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.setting {
            cfg.setting = s;
        }
        if let Some(s) = &self.skeleton {
            cfg.skeleton = Some(s.clone());
        }
        if !self.data.is_empty() {
            cfg.data.recordings = self.data.clone();
        }
        if let Some(c) = &self.checkpoint {
            cfg.eval.checkpoint = Some(c.clone());
        }
        Ok(cfg)
    }
}

/// Runs one command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli
        .resolve()
        .and_then(|cfg| commands::execute(cli.command, &cfg))
    {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pose2gaze {}: error: {e}", cli.command.name());
            1
        }
    }
}
