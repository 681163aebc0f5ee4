use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{FlipScope, SplitFractions};
use crate::error::{Error, Result};
use crate::model::{BaselineKind, EncoderAdapter, HeadConfig, MockEncoder};
use crate::promptlab::{Delimiters, EndpointConfig, Exemplar, ExemplarSet, PromptMode, PromptSettings};
use crate::textprep::{MockTokenizer, TokenizerAdapter, TruncationPolicy};
use crate::training::StagedSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset files; they are concatenated before splitting.
    pub paths: Vec<PathBuf>,
    pub expect_labels: bool,
    pub fractions: SplitFractions,
    /// Defaults to the global seed.
    pub split_seed: Option<u64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            paths: Vec::new(),
            expect_labels: true,
            fractions: SplitFractions::default(),
            split_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Encoder identifier; only `mock` ships with this build.
    pub kind: String,
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    /// Hidden layer read for the CLS feature; `None` is the final layer.
    pub feature_layer: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: "mock".into(),
            vocab_size: 8192,
            hidden_dim: 32,
            layers: 2,
            feature_layer: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    #[serde(flatten)]
    pub schedule: StagedSchedule,
    /// Inverse-frequency class weights in the loss.
    pub class_weights: bool,
    pub head_seed: Option<u64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            schedule: StagedSchedule::default(),
            class_weights: true,
            head_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    MaxLength,
    #[default]
    Epochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub max_lengths: Vec<usize>,
    pub epochs: Vec<(usize, usize)>,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kind: SweepKind::Epochs,
            max_lengths: vec![16, 32, 55, 64, 128],
            epochs: vec![(3, 2), (3, 3), (4, 3), (4, 4), (4, 5), (5, 3)],
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSplit {
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub mode: PromptMode,
    pub delimiters: Delimiters,
    pub split: PromptSplit,
    pub endpoint: EndpointConfig,
    pub exemplars: Option<Vec<Exemplar>>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            mode: PromptMode::ZeroShot,
            delimiters: Delimiters::Literal,
            split: PromptSplit::Test,
            endpoint: EndpointConfig::default(),
            exemplars: None,
        }
    }
}

impl PromptConfig {
    pub fn settings(&self) -> PromptSettings {
        PromptSettings {
            mode: self.mode,
            delimiters: self.delimiters,
            parallelism: self.endpoint.parallelism,
            max_retries: self.endpoint.max_retries,
            retry_backoff_ms: self.endpoint.retry_backoff_ms,
        }
    }

    pub fn exemplar_set(&self) -> Result<Option<ExemplarSet>> {
        self.exemplars
            .clone()
            .map(ExemplarSet::try_from)
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub flip_scope: FlipScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Run directories compared by the report command.
    pub runs: Vec<PathBuf>,
}

/// Everything a run needs. Loaded from TOML; the resolved form (all seeds
/// filled in) is written to every run directory as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Row label in comparison tables.
    pub name: Option<String>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub encoder: EncoderConfig,
    pub max_len: usize,
    pub head: HeadConfig,
    pub training: TrainingConfig,
    /// Classic classifiers fitted on frozen-encoder features by `train`.
    pub baselines: Vec<BaselineKind>,
    /// Also write the training feature matrix as CSV.
    pub export_features: bool,
    pub sweep: SweepConfig,
    pub prompt: PromptConfig,
    pub stats: StatsConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: None,
            seed: 42,
            output_dir: PathBuf::from("runs/latest"),
            data: DataConfig::default(),
            encoder: EncoderConfig::default(),
            max_len: 55,
            head: HeadConfig::default(),
            training: TrainingConfig::default(),
            baselines: Vec::new(),
            export_features: false,
            sweep: SweepConfig::default(),
            prompt: PromptConfig::default(),
            stats: StatsConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Loads a TOML config. Relative dataset and run paths are resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.data.paths.iter_mut().for_each(rebase);
        config.report.runs.iter_mut().for_each(rebase);
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Fills every derived seed from the global one and checks invariants.
    pub fn resolve(mut self) -> Result<Self> {
        let seed = self.seed;
        self.data.split_seed.get_or_insert(seed);
        self.encoder.seed.get_or_insert(seed);
        self.training.head_seed.get_or_insert(seed.wrapping_add(1));
        self.training.schedule.seed = seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.fractions.validate()?;
        TruncationPolicy::new(self.max_len)?;
        self.head.validate()?;
        self.training.schedule.validate()?;
        if self.encoder.kind != "mock" {
            return Err(Error::Config(format!(
                "encoder '{}' is not available in this build; use kind = \"mock\"",
                self.encoder.kind
            )));
        }
        if let Some(l) = self.encoder.feature_layer {
            if l > self.encoder.layers {
                return Err(Error::Config(format!(
                    "feature_layer {l} exceeds the encoder's {} layers",
                    self.encoder.layers
                )));
            }
        }
        self.prompt.exemplar_set()?;
        Ok(())
    }

    pub fn tokenizer(&self) -> Result<Box<dyn TokenizerAdapter>> {
        Ok(Box::new(MockTokenizer::new(self.encoder.vocab_size)?))
    }

    pub fn encoder(&self) -> Result<Box<dyn EncoderAdapter>> {
        Ok(Box::new(MockEncoder::new(
            self.encoder.vocab_size,
            self.encoder.hidden_dim,
            self.encoder.layers,
            self.encoder.seed.unwrap_or(self.seed),
        )?))
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy { max_len: self.max_len }
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.encoder.kind.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_best_configuration() {
        let c = RunConfig::default();
        assert_eq!(c.max_len, 55);
        assert_eq!(c.head, HeadConfig { hidden: 128, dropout: 0.5 });
        let s = c.training.schedule;
        assert_eq!((s.frozen_epochs, s.finetune_epochs, s.batch_size, s.warmup_steps), (4, 3, 64, 10_000));
        assert_eq!((s.lr_stage1, s.lr_stage2), (5e-5, 2e-5));
    }

    #[test]
    fn toml_overrides() {
        let c = RunConfig::from_toml_str(
            r#"
            seed = 7
            max_len = 32
            [data]
            paths = ["a.json"]
            [training]
            frozen_epochs = 10
            lr_stage1 = 1e-3
            [sweep]
            epochs = [[1, 0], [2, 1]]
            "#,
        )
        .unwrap();
        assert_eq!(c.training.schedule.frozen_epochs, 10);
        assert_eq!(c.training.schedule.finetune_epochs, 3);
        assert_eq!(c.sweep.epochs, vec![(1, 0), (2, 1)]);
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig::default().resolve().unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn resolve_fills_seeds() {
        let c = RunConfig {
            seed: 9,
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(c.data.split_seed, Some(9));
        assert_eq!(c.encoder.seed, Some(9));
        assert_eq!(c.training.schedule.seed, 9);
    }

    #[test]
    fn unknown_encoder() {
        let mut c = RunConfig::default();
        c.encoder.kind = "xlm-roberta-large".into();
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }
}
