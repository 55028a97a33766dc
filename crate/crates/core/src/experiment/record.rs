use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::attacks::{AttackKind, LeakSummary};
use crate::splitproto::{TimingReport, UtilityReport};
use crate::{Error, Result};

pub const RECORD_PREFIX: &str = "run-";

/// Everything one `train` run produced.
///
/// Rerunning [`RunRecord::config`] reproduces every field bit for bit
/// except `timing` and `created_unix`, which are wall-clock readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Expanded label dimension `K` when defended.
    pub dimension: Option<usize>,
    pub epoch_losses: Vec<f64>,
    pub utility: UtilityReport,
    pub attacks: Vec<AttackEntry>,
    pub timing: TimingReport,
    pub tool_version: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEntry {
    pub attack: AttackKind,
    pub summary: Option<LeakSummary>,
    /// Why the attack did not run, e.g. a binary-only attack on a
    /// multi-class task.
    pub skipped: Option<String>,
    /// Per-sample scores file, relative to the record.
    pub scores_file: Option<String>,
}

impl AttackEntry {
    pub fn metric(&self) -> Option<f64> {
        self.summary.as_ref().and_then(LeakSummary::metric)
    }
}

impl RunRecord {
    pub fn attack(&self, kind: AttackKind) -> Option<&AttackEntry> {
        self.attacks.iter().find(|a| a.attack == kind)
    }

    /// Leak metric of `kind`, if it ran and produced one.
    pub fn leak(&self, kind: AttackKind) -> Option<f64> {
        self.attack(kind).and_then(AttackEntry::metric)
    }

    pub fn file_name(&self) -> String {
        record_file_name(&self.run_id)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn record_file_name(run_id: &str) -> String {
    format!("{RECORD_PREFIX}{run_id}.json")
}

/// Content address of a configuration: the first 16 hex digits of the
/// SHA-256 of its JSON form, ignoring the output directory.
pub fn run_id(cfg: &ExperimentConfig) -> Result<String> {
    let mut canonical = cfg.clone();
    canonical.out_dir = None;
    let json = serde_json::to_vec(&canonical)?;
    Ok(hex::encode(Sha256::digest(&json))[..16].to_string())
}

/// Writes `bytes` next to `path` and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
