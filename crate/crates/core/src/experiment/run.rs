use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::record::{record_file_name, run_id, write_atomic, AttackEntry, RunRecord};
use super::ExperimentConfig;
use crate::attacks::{
    direction_attack, final_epoch_window, model_completion_attack, norm_attack, pick_auxiliary, spectral_attack,
    AttackKind, AttackReport,
};
use crate::data::{train_test_split, Dataset, Split};
use crate::numerics::RngStream;
use crate::secdt::MappingPools;
use crate::splitproto::{evaluate, fit, EpochWindow, TrainOutcome};
use crate::{Error, Result};

/// A finished run: its record plus the per-sample outputs the record points
/// at.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub record: RunRecord,
    /// One report per attack that ran, in record order.
    pub reports: Vec<AttackReport>,
    pub pools: Option<MappingPools>,
}

/// Data and trained model of one run, before any attack.
pub struct TrainedRun {
    pub train: Dataset,
    pub test: Dataset,
    pub outcome: TrainOutcome,
}

/// Loads and splits the data and trains the split model. The data, split,
/// and training draw from the `data`, `split` and `train` children of the
/// config seed.
pub fn train_only(cfg: &ExperimentConfig) -> Result<TrainedRun> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let data = cfg.dataset.load(&root.child("data"))?;
    cfg.validate_for(data.classes())?;
    let (train, test) = train_test_split(&data, cfg.test_fraction, &mut root.child("split"))?;
    let tcfg = cfg.train_config(data.classes())?;
    let outcome = fit(&cfg.model, &train, &tcfg)?;
    Ok(TrainedRun { train, test, outcome })
}

/// Trains, evaluates and attacks; touches no files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let id = run_id(cfg)?;
    let TrainedRun { train, test, outcome } = train_only(cfg)?;
    let utility = evaluate(&outcome.model, &test, outcome.pools.as_ref())?;
    let rng = RngStream::new(cfg.seed).child("attacks");

    let mut entries = Vec::new();
    let mut reports = Vec::new();
    let mut seen = Vec::new();
    for &kind in &cfg.attacks.run {
        if seen.contains(&kind) {
            continue;
        }
        seen.push(kind);
        match run_attack(cfg, kind, &train, &outcome, &rng)? {
            Ok(report) => {
                entries.push(AttackEntry {
                    attack: kind,
                    summary: Some(report.summarize(train.labels(), train.classes())?),
                    skipped: None,
                    scores_file: Some(scores_file_name(&id, kind)),
                });
                reports.push(report);
            }
            Err(reason) => {
                log::warn!("{kind} attack skipped: {reason}");
                entries.push(AttackEntry {
                    attack: kind,
                    summary: None,
                    skipped: Some(reason),
                    scores_file: None,
                });
            }
        }
    }

    let record = RunRecord {
        run_id: id,
        config: cfg.clone(),
        classes: train.classes(),
        train_samples: train.len(),
        test_samples: test.len(),
        dimension: outcome.pools.as_ref().map(MappingPools::dimension),
        epoch_losses: outcome.epoch_losses.clone(),
        utility,
        attacks: entries,
        timing: outcome.timing,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    Ok(RunArtifacts {
        record,
        reports,
        pools: outcome.pools,
    })
}

/// `Ok(Err(reason))` when the attack does not apply to this run.
fn run_attack(
    cfg: &ExperimentConfig,
    kind: AttackKind,
    train: &Dataset,
    outcome: &TrainOutcome,
    rng: &RngStream,
) -> Result<std::result::Result<AttackReport, String>> {
    let a = &cfg.attacks;
    let hint = a.majority_hint.unwrap_or_else(|| train.majority_class());
    let binary_only = matches!(kind, AttackKind::Direction | AttackKind::Spectral);
    if binary_only && train.classes() != 2 {
        return Ok(Err(format!("needs a binary task, this one has {} classes", train.classes())));
    }
    let window = match (kind, a.window) {
        (AttackKind::ModelCompletion, _) => EpochWindow::ALL,
        (_, Some(w)) => w,
        (_, None) => match final_epoch_window(&outcome.tap) {
            Ok(w) => w,
            Err(_) => return Ok(Err("the tap recorded nothing".into())),
        },
    };
    let result = match kind {
        AttackKind::Norm => norm_attack(&outcome.tap, window),
        AttackKind::Direction => {
            direction_attack(&outcome.tap, window, hint, a.reference_size, &mut rng.child("direction"))
        }
        AttackKind::Spectral => spectral_attack(&outcome.tap, window, a.spectral_source, hint),
        AttackKind::ModelCompletion => {
            let rng = rng.child("completion");
            let (aux, rest) = pick_auxiliary(train, a.completion.aux_per_class, &mut rng.child("aux"))?;
            if rest.is_empty() {
                return Ok(Err("the auxiliary set takes every training sample".into()));
            }
            model_completion_attack(
                &outcome.model.bottom,
                &train.subset(&aux, Split::Train),
                &train.subset(&rest, Split::Train),
                &a.completion,
                &mut rng.child("fit"),
            )
            .map(|mut report| {
                // ids index the unlabeled subset; map them back to training rows
                report.sample_ids = report.sample_ids.iter().map(|&i| rest[i as usize] as u64).collect();
                report
            })
        }
    };
    match result {
        Ok(r) => Ok(Ok(r)),
        Err(Error::Degenerate(msg)) => Ok(Err(msg)),
        Err(Error::InvalidArgument(msg)) if msg.contains("window") || msg.contains("no observations") => {
            Ok(Err(msg))
        }
        Err(e) => Err(e),
    }
}

pub fn scores_file_name(run_id: &str, kind: AttackKind) -> String {
    format!("run-{run_id}.{kind}.csv")
}

pub fn pools_file_name(run_id: &str) -> String {
    format!("run-{run_id}.pools.txt")
}

/// Writes the attack score files, the pools sidecar and finally the record
/// itself (atomically), so a record on disk implies its companions are
/// complete. Returns the record path.
pub fn write_run(artifacts: &RunArtifacts, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rec = &artifacts.record;
    for report in &artifacts.reports {
        let name = scores_file_name(&rec.run_id, report.attack);
        let tmp = dir.join(format!(".{name}.tmp"));
        report.write_csv(&tmp)?;
        let dest = dir.join(&name);
        std::fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
    }
    if let Some(pools) = &artifacts.pools {
        write_atomic(&dir.join(pools_file_name(&rec.run_id)), pools.to_sidecar().as_bytes())?;
    }
    let path = dir.join(record_file_name(&rec.run_id));
    write_atomic(&path, rec.to_json()?.as_bytes())?;
    Ok(path)
}

/// Runs one experiment and writes its record under the resolved output
/// directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(RunRecord, PathBuf)> {
    let artifacts = run_experiment(cfg)?;
    let path = write_run(&artifacts, &cfg.resolved_out_dir())?;
    Ok((artifacts.record, path))
}
