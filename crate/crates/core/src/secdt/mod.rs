//! The SecDT defense, run entirely by the guest.
//!
//! Labels are lifted into a larger code space before training (each class
//! owns a pool of codes and every sample is pinned to one code from its
//! class's pool), training targets get softmax-normalized Gaussian noise,
//! and every cut-layer gradient is rescaled to a common norm before it is
//! sent to the host. Predictions are mapped back to the original classes by
//! summing probability mass over each pool.

mod noise;
mod normalize;
mod pools;

use serde::{Deserialize, Serialize};

pub use noise::{noised_targets, sgn_noise, sgn_noise_raw};
pub use normalize::{normalize_gradients, NormStandard};
pub use pools::{build_mapping_pools, maximum_mapping, transform_labels, weighted_mapping, MappingPools};

use crate::data::Dataset;
use crate::models::Architecture;
use crate::splitproto::{fit, TrainConfig, TrainOutcome};
use crate::{Error, Result};

/// When fresh label noise is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseResample {
    #[default]
    PerEpoch,
    Once,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseConfig {
    /// Expanded label dimension `K`; a multiple of the class count.
    pub dimension: usize,
    #[serde(default)]
    pub norm_standard: NormStandard,
    /// `μ ∈ [0, 1)`.
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub noise_resample: NoiseResample,
    /// Rescale noised targets to sum to one. When false the targets sum to
    /// `1 + μ` and the matching loss gradient is used.
    #[serde(default = "default_true")]
    pub renormalize: bool,
}

fn default_true() -> bool {
    true
}

impl DefenseConfig {
    /// `K = ratio·k`, mean-norm standard, per-epoch noise.
    pub fn with_ratio(classes: usize, ratio: usize, noise_level: f64) -> Self {
        Self {
            dimension: classes * ratio,
            norm_standard: NormStandard::Mean,
            noise_level,
            noise_resample: NoiseResample::PerEpoch,
            renormalize: true,
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.dimension < classes || classes == 0 || self.dimension % classes != 0 {
            return Err(Error::InvalidArgument(format!(
                "dimension {} must be a positive multiple of the class count {classes}",
                self.dimension
            )));
        }
        if !(0.0..1.0).contains(&self.noise_level) {
            return Err(Error::InvalidArgument(format!(
                "noise level must lie in [0, 1), got {}",
                self.noise_level
            )));
        }
        Ok(())
    }
}

/// Trains a defended split model. The pools built for the run are returned
/// in the outcome, and test predictions should be decoded with
/// [`weighted_mapping`].
pub fn secdt_fit(data: &Dataset, cfg: &TrainConfig, arch: &Architecture) -> Result<TrainOutcome> {
    if cfg.defense.is_none() {
        return Err(Error::InvalidArgument("secdt_fit needs a defense config".into()));
    }
    fit(arch, data, cfg)
}
