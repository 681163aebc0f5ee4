//! Wire types shared by the HTTP service and its client.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::EmotionLabel;
use crate::error::{Error, ErrorKind, Result};
use crate::pipeline::{self, RunConfig, RunOutcome, SweepKind};
use crate::promptlab::{self, Delimiters, Exemplar, ExemplarSet, PromptMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Stats,
    Train,
    Sweep,
    PromptEval,
    Report,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Stats => "stats",
            Command::Train => "train",
            Command::Sweep => "sweep",
            Command::PromptEval => "prompt-eval",
            Command::Report => "report",
        }
    }
}

/// One pipeline command. Paths must be meaningful on the server side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub config: RunConfig,
    /// Run directory; defaults to `config.output_dir`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Overrides `config.seed` before seeds are derived.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sweep kind; defaults to `config.sweep.kind`.
    #[serde(default)]
    pub kind: Option<SweepKind>,
    #[serde(default)]
    pub replay: Option<PathBuf>,
    /// Run directories for `report`; defaults to `config.report.runs`.
    #[serde(default)]
    pub runs: Vec<PathBuf>,
}

impl RunRequest {
    pub fn new(config: RunConfig) -> Self {
        RunRequest {
            config,
            out: None,
            seed: None,
            kind: None,
            replay: None,
            runs: Vec::new(),
        }
    }

    /// Final config (seed override applied, seeds derived) and run directory.
    pub fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let mut config = self.config.clone();
        if let Some(seed) = self.seed {
            config.seed = seed;
            config.data.split_seed = None;
            config.encoder.seed = None;
            config.training.head_seed = None;
        }
        let config = config.resolve()?;
        let out = self.out.clone().unwrap_or_else(|| config.output_dir.clone());
        Ok((config, out))
    }
}

/// Runs `command` to completion on the calling thread.
pub fn execute(command: Command, request: &RunRequest) -> Result<RunOutcome> {
    let (config, out) = request.resolve()?;
    match command {
        Command::Stats => pipeline::cmd_stats(&config, &out),
        Command::Train => pipeline::cmd_train(&config, &out),
        Command::Sweep => pipeline::cmd_sweep(&config, request.kind.unwrap_or(config.sweep.kind), &out),
        Command::PromptEval => pipeline::cmd_prompt_eval(&config, &out, request.replay.as_deref()),
        Command::Report => pipeline::cmd_report(&config, &request.runs, &out),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        ApiError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub preds: Vec<EmotionLabel>,
    pub golds: Vec<EmotionLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRequest {
    #[serde(default)]
    pub mode: PromptMode,
    #[serde(default)]
    pub delimiters: Delimiters,
    pub sentence: String,
    #[serde(default)]
    pub exemplars: Option<Vec<Exemplar>>,
}

impl RenderRequest {
    pub fn render(&self) -> Result<String> {
        let set = self.exemplars.clone().map(ExemplarSet::try_from).transpose()?;
        promptlab::render(self.mode, set.as_ref(), &self.sentence, self.delimiters)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderResponse {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRequest {
    pub completion: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrQuery {
    pub step: u64,
    pub base: f64,
    pub warmup: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrResponse {
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}
