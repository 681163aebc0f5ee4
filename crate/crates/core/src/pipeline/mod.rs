//! Run configuration, run directories and the five user-facing commands.

mod commands;
mod config;
pub mod plots;
mod rundir;

pub use commands::{
    cmd_prompt_eval, cmd_prompt_eval_with, cmd_report, cmd_stats, cmd_sweep, cmd_train, ResultRow, RunOutcome,
};
pub use config::{
    DataConfig, EncoderConfig, PromptConfig, PromptSplit, ReportConfig, RunConfig, StatsConfig, SweepConfig,
    SweepKind, TrainingConfig,
};
pub use rundir::{list_files, ArtifactEntry, RunManifest, RunStatus, RunWriter, SeedProvenance, CONFIG, MANIFEST};
