use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::{run_id, RunRecord};
use super::run::{run_experiment, write_run, RunArtifacts};
use super::{par_map, ExperimentConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Expanded label dimension `K`.
    Dimension,
    /// SGN noise level `μ`.
    Noise,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Dimension => "dimension",
            SweepAxis::Noise => "noise",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dimension" => Ok(SweepAxis::Dimension),
            "noise" => Ok(SweepAxis::Noise),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep axis {other:?}; expected dimension or noise"
            ))),
        }
    }
}

/// One config per value, all sharing the base seed. A base config without a
/// defense gets the default one. Every value is checked before returning.
pub fn sweep_configs(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    base.validate()?;
    let classes = match base.dataset.declared_classes() {
        Some(k) => k,
        None => base.dataset.load(&crate::numerics::RngStream::new(base.seed).child("data"))?.classes(),
    };
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        let defense = cfg.defense.get_or_insert_with(Default::default);
        match axis {
            SweepAxis::Dimension => {
                if !(v.fract() == 0.0 && v >= 1.0) || (v as usize) % classes != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "dimension {v} is not a positive multiple of the {classes} classes"
                    )));
                }
                defense.dimension = Some(v as usize);
                defense.ratio = None;
            }
            SweepAxis::Noise => {
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("noise level {v} is outside [0, 1)")));
                }
                defense.noise_level = v;
            }
        }
        cfg.validate()?;
        cfg.validate_for(classes)?;
        out.push(cfg);
    }
    Ok(out)
}

/// Runs every value of the sweep, up to `workers` at a time. Fails on the
/// first failing run, in value order.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    workers: usize,
) -> Result<Vec<RunArtifacts>> {
    let configs = sweep_configs(base, axis, values)?;
    par_map(&configs, workers, run_experiment)?.into_iter().collect()
}

pub fn summary_file_name(base: &ExperimentConfig, axis: SweepAxis) -> Result<String> {
    Ok(format!("sweep-{axis}-{}.csv", run_id(base)?))
}

/// Writes `(value, run_id, test_utility, <attack>...)` rows, one per run.
/// Attack columns follow the base config's attack list; skipped attacks
/// leave the cell empty.
pub fn write_sweep_summary(
    path: &Path,
    base: &ExperimentConfig,
    values: &[f64],
    records: &[RunRecord],
) -> Result<()> {
    let mut buf = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["value".to_string(), "run_id".into(), "test_utility".into()];
    header.extend(base.attacks.run.iter().map(|a| a.to_string()));
    buf.write_record(&header).map_err(csv_err)?;
    for (v, rec) in values.iter().zip(records) {
        let mut row = vec![v.to_string(), rec.run_id.clone(), rec.utility.headline().to_string()];
        row.extend(
            base.attacks
                .run
                .iter()
                .map(|&a| rec.leak(a).map(|m| m.to_string()).unwrap_or_default()),
        );
        buf.write_record(&row).map_err(csv_err)?;
    }
    let bytes = buf.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    super::record::write_atomic(path, &bytes)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Runs the sweep and writes every run plus the summary CSV under the
/// resolved output directory.
pub fn cmd_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    workers: usize,
) -> Result<(Vec<RunRecord>, PathBuf)> {
    let dir = base.resolved_out_dir();
    let runs = run_sweep(base, axis, values, workers)?;
    for run in &runs {
        write_run(run, &dir)?;
    }
    let records: Vec<RunRecord> = runs.into_iter().map(|r| r.record).collect();
    let summary = dir.join(summary_file_name(base, axis)?);
    write_sweep_summary(&summary, base, values, &records)?;
    Ok((records, summary))
}
