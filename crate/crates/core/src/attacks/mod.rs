//! Label-inference attacks available to an honest-but-curious host.
//!
//! Every attack reads the host's [`GradientTap`] (or its trained bottom
//! model) and never writes to it. Scores are per sample id; the harness
//! compares them with the private labels it holds.

mod completion;
mod infer_k;
mod scoring;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use completion::{model_completion_attack, pick_auxiliary, CompletionConfig};
pub use infer_k::{infer_k_attack, KInference, DEFAULT_MAX_POINTS};
pub use scoring::{direction_attack, norm_attack, spectral_attack, DEFAULT_REFERENCE_SIZE};

use crate::metrics::{accuracy, leak_auc, roc_auc};
use crate::splitproto::{EpochWindow, GradientTap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Norm,
    Direction,
    Spectral,
    ModelCompletion,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Norm,
        AttackKind::Direction,
        AttackKind::Spectral,
        AttackKind::ModelCompletion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Norm => "norm",
            AttackKind::Direction => "direction",
            AttackKind::Spectral => "spectral",
            AttackKind::ModelCompletion => "model_completion",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|a| a.name() == s || a.name().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown attack {s:?}")))
    }
}

/// Per-sample output of one attack.
///
/// Score orientation is attack-specific; the leak AUC in [`LeakSummary`]
/// does not depend on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub sample_ids: Vec<u64>,
    pub scores: Vec<f64>,
    pub predicted: Option<Vec<usize>>,
    /// Tap epochs the attack read; `None` for attacks on the bottom model.
    pub window: Option<EpochWindow>,
}

/// How much an attack learned about the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakSummary {
    pub attack: AttackKind,
    pub window: Option<EpochWindow>,
    pub samples: usize,
    /// Raw ROC-AUC of the scores (binary tasks).
    pub roc_auc: Option<f64>,
    /// `max(AUC, 1 − AUC)` (binary tasks).
    pub leak_auc: Option<f64>,
    /// Accuracy of the predicted labels, when the attack predicts.
    pub accuracy: Option<f64>,
}

impl LeakSummary {
    /// Leak AUC for binary tasks, accuracy otherwise.
    pub fn metric(&self) -> Option<f64> {
        self.leak_auc.or(self.accuracy)
    }
}

impl AttackReport {
    /// Scores the report against `labels`, indexed by sample id.
    pub fn summarize(&self, labels: &[usize], classes: usize) -> Result<LeakSummary> {
        let truth = self
            .sample_ids
            .iter()
            .map(|&id| {
                labels
                    .get(id as usize)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("no label for sample {id}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let (roc, leak) = if classes == 2 {
            let positives: Vec<bool> = truth.iter().map(|&y| y == 1).collect();
            if positives.iter().all(|&p| p) || !positives.iter().any(|&p| p) {
                (None, None)
            } else {
                (
                    Some(roc_auc(&self.scores, &positives)?),
                    Some(leak_auc(&self.scores, &positives)?),
                )
            }
        } else {
            (None, None)
        };
        let acc = match &self.predicted {
            Some(pred) => Some(accuracy(pred, &truth)?),
            None => None,
        };
        Ok(LeakSummary {
            attack: self.attack,
            window: self.window,
            samples: self.sample_ids.len(),
            roc_auc: roc,
            leak_auc: leak,
            accuracy: acc,
        })
    }

    /// `sample_id,score,predicted_label`; the last column is empty when the
    /// attack does not predict labels.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["sample_id", "score", "predicted_label"])
            .map_err(|e| csv_error(path, e))?;
        for (i, (id, score)) in self.sample_ids.iter().zip(&self.scores).enumerate() {
            let pred = self.predicted.as_ref().map_or(String::new(), |p| p[i].to_string());
            w.write_record([id.to_string(), score.to_string(), pred])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// The tap's final recorded epoch, the default attack window.
pub fn final_epoch_window(tap: &GradientTap) -> Result<EpochWindow> {
    tap.last_epoch()
        .map(EpochWindow::single)
        .ok_or_else(|| Error::InvalidArgument("the tap is empty".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in AttackKind::ALL {
            assert_eq!(a.name().parse::<AttackKind>().unwrap(), a);
        }
        assert_eq!("model-completion".parse::<AttackKind>().unwrap(), AttackKind::ModelCompletion);
        assert!("gradient".parse::<AttackKind>().is_err());
    }

    #[test]
    fn summary_by_sample_id() {
        let report = AttackReport {
            attack: AttackKind::Norm,
            sample_ids: vec![2, 0, 1],
            scores: vec![3.0, 0.1, 0.2],
            predicted: Some(vec![1, 0, 1]),
            window: None,
        };
        let s = report.summarize(&[0, 0, 1], 2).unwrap();
        assert_eq!(s.leak_auc, Some(1.0));
        assert_eq!(s.accuracy, Some(2.0 / 3.0));
        assert_eq!(s.metric(), Some(1.0));
        assert!(report.summarize(&[0, 1], 2).is_err());
    }
}
