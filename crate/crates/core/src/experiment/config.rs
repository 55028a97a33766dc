use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackKind, CompletionConfig, DEFAULT_REFERENCE_SIZE};
use crate::data::{gen_synthetic, load_csv, load_idx, Dataset, SyntheticSpec};
use crate::models::{Architecture, OptimizerState, Schedule};
use crate::numerics::RngStream;
use crate::secdt::{DefenseConfig, NoiseResample, NormStandard};
use crate::splitproto::{EpochWindow, TapSource, TrainConfig};
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SPLITLAB_OUT";
pub const DEFAULT_OUT_DIR: &str = "runs";

/// One experiment: data, model, training, defense and attacks.
///
/// Loaded from TOML; every section and most fields have defaults, so an
/// empty file describes the imbalanced synthetic binary task trained
/// without a defense and attacked by all four scoring attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Where records go; falls back to `$SPLITLAB_OUT`, then `runs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: Architecture,
    #[serde(default)]
    pub train: TrainSection,
    /// Absent means the run is undefended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defense: Option<DefenseSection>,
    #[serde(default)]
    pub attacks: AttackSection,
}

fn default_seed() -> u64 {
    42
}

fn default_test_fraction() -> f64 {
    0.2
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            test_fraction: default_test_fraction(),
            out_dir: None,
            dataset: DatasetSpec::default(),
            model: Architecture::default(),
            train: TrainSection::default(),
            defense: None,
            attacks: AttackSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
        label_column: String,
        /// Defaults to every column except the label.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature_columns: Option<Vec<String>>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SyntheticSpec::binary(10_000, 32, 0.05, 6.0))
    }
}

impl DatasetSpec {
    /// Class count when it is known without reading files.
    pub fn declared_classes(&self) -> Option<usize> {
        match self {
            DatasetSpec::Synthetic(s) => Some(s.classes()),
            _ => None,
        }
    }

    /// Materializes the dataset; synthetic draws use `rng`.
    pub fn load(&self, rng: &RngStream) -> Result<Dataset> {
        Ok(match self {
            DatasetSpec::Synthetic(spec) => gen_synthetic(spec, rng)?,
            DatasetSpec::Csv {
                path,
                label_column,
                feature_columns,
            } => load_csv(path, label_column, feature_columns.as_deref())?.0,
            DatasetSpec::Idx { images, labels } => load_idx(images, labels)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    /// Epochs the host's tap records; defaults to all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap_window: Option<EpochWindow>,
}

fn default_epochs() -> u32 {
    20
}
fn default_batch() -> usize {
    64
}
fn default_lr() -> f64 {
    0.1
}

/// Normalized gradients keep pushing confidently classified samples at full
/// strength, which at a constant rate lets the embedding scale run away on
/// separable data. A decaying rate keeps those runs bounded.
fn default_schedule() -> Schedule {
    Schedule::InverseTime { decay: 0.02 }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            schedule: default_schedule(),
            tap_window: None,
        }
    }
}

/// SecDT settings. `K` is given either directly as `dimension` or as
/// `ratio · k`; with neither, `ratio = 10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<usize>,
    #[serde(default)]
    pub norm_standard: NormStandard,
    #[serde(default = "default_noise")]
    pub noise_level: f64,
    #[serde(default)]
    pub noise_resample: NoiseResample,
    #[serde(default = "default_true")]
    pub renormalize: bool,
}

fn default_noise() -> f64 {
    0.2
}
fn default_true() -> bool {
    true
}
const DEFAULT_RATIO: usize = 10;

impl Default for DefenseSection {
    fn default() -> Self {
        Self {
            dimension: None,
            ratio: None,
            norm_standard: NormStandard::Mean,
            noise_level: default_noise(),
            noise_resample: NoiseResample::PerEpoch,
            renormalize: true,
        }
    }
}

impl DefenseSection {
    pub fn resolve(&self, classes: usize) -> Result<DefenseConfig> {
        let dimension = match (self.dimension, self.ratio) {
            (Some(d), Some(r)) if d != r * classes => {
                return Err(Error::Config(format!(
                    "defense dimension {d} disagrees with ratio {r} for {classes} classes"
                )))
            }
            (Some(d), _) => d,
            (None, r) => r.unwrap_or(DEFAULT_RATIO) * classes,
        };
        let cfg = DefenseConfig {
            dimension,
            norm_standard: self.norm_standard,
            noise_level: self.noise_level,
            noise_resample: self.noise_resample,
            renormalize: self.renormalize,
        };
        cfg.validate(classes)?;
        Ok(cfg)
    }

    fn validate_static(&self) -> Result<()> {
        if self.dimension == Some(0) || self.ratio == Some(0) {
            return Err(Error::Config("defense dimension and ratio must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.noise_level) {
            return Err(Error::Config(format!(
                "noise level must lie in [0, 1), got {}",
                self.noise_level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(default = "default_attacks")]
    pub run: Vec<AttackKind>,
    /// Tap epochs the gradient attacks read; defaults to the final epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<EpochWindow>,
    #[serde(default = "default_source")]
    pub spectral_source: TapSource,
    #[serde(default = "default_reference")]
    pub reference_size: usize,
    /// Class the attacker believes is the majority; defaults to the
    /// training majority.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majority_hint: Option<usize>,
    #[serde(default)]
    pub completion: CompletionConfig,
}

fn default_attacks() -> Vec<AttackKind> {
    AttackKind::ALL.to_vec()
}
fn default_source() -> TapSource {
    TapSource::Embeddings
}
fn default_reference() -> usize {
    DEFAULT_REFERENCE_SIZE
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            run: default_attacks(),
            window: None,
            spectral_source: default_source(),
            reference_size: default_reference(),
            majority_hint: None,
            completion: CompletionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if let DatasetSpec::Synthetic(s) = &self.dataset {
            s.validate()?;
            if s.n == 0 {
                return Err(Error::Config("synthetic dataset needs at least one sample".into()));
            }
        }
        let m = &self.model;
        if m.bottom_hidden == 0 || m.cut_width == 0 || m.top_hidden == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        OptimizerState::new(t.learning_rate, t.schedule)?;
        if let Some(d) = &self.defense {
            d.validate_static()?;
        }
        let a = &self.attacks;
        if a.reference_size == 0 {
            return Err(Error::Config("direction reference size must be at least 1".into()));
        }
        let c = &a.completion;
        if c.aux_per_class == 0 || c.hidden == 0 || c.batch_size == 0 || c.epochs == 0 {
            return Err(Error::Config("model completion settings must be positive".into()));
        }
        OptimizerState::constant(c.learning_rate)?;
        if let Some(classes) = self.dataset.declared_classes() {
            self.validate_for(classes)?;
        }
        Ok(())
    }

    /// Checks that depend on the class count.
    pub fn validate_for(&self, classes: usize) -> Result<()> {
        if let Some(d) = &self.defense {
            d.resolve(classes)?;
        }
        if let Some(h) = self.attacks.majority_hint {
            if h >= classes {
                return Err(Error::Config(format!("majority hint {h} is not a class of {classes}")));
            }
        }
        Ok(())
    }

    /// Training settings for a task with `classes` classes.
    pub fn train_config(&self, classes: usize) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            schedule: self.train.schedule,
            seed: RngStream::new(self.seed).child("train").seed(),
            defense: self.defense.as_ref().map(|d| d.resolve(classes)).transpose()?,
            tap_window: self.train.tap_window.unwrap_or(EpochWindow::ALL),
        })
    }

    /// Flag, then config file, then `$SPLITLAB_OUT`, then `runs`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
