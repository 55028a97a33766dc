use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{run_id, write_atomic};
use super::run::train_only;
use super::sweep::csv_err;
use super::{par_map, ExperimentConfig};
use crate::attacks::{final_epoch_window, infer_k_attack, DEFAULT_MAX_POINTS};
use crate::numerics::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferKTrial {
    pub trial: u32,
    pub seed: u64,
    pub guess: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferKSummary {
    /// The guest's true `K`.
    pub dimension: usize,
    pub k_max: usize,
    pub trials: Vec<InferKTrial>,
}

impl InferKSummary {
    /// Guess → number of trials that made it.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for t in &self.trials {
            *h.entry(t.guess).or_insert(0) += 1;
        }
        h
    }

    /// Most frequent guess; ties go to the smaller dimension.
    pub fn mode(&self) -> Option<usize> {
        let h = self.histogram();
        let top = h.values().copied().max()?;
        h.into_iter().find(|&(_, n)| n == top).map(|(g, _)| g)
    }

    pub fn correct_fraction(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        let hits = self.trials.iter().filter(|t| t.guess == self.dimension).count();
        hits as f64 / self.trials.len() as f64
    }
}

/// Trains `trials` defended models, trial `t` seeded from the
/// `trial`/`t` child of the config seed, and guesses `K` from each tap.
/// `k_max` defaults to `2K`.
pub fn run_infer_k(
    cfg: &ExperimentConfig,
    trials: u32,
    k_max: Option<usize>,
    workers: usize,
) -> Result<InferKSummary> {
    if trials < 1 {
        return Err(Error::InvalidArgument("infer-k needs at least one trial".into()));
    }
    let Some(defense) = &cfg.defense else {
        return Err(Error::InvalidArgument("infer-k needs a defended config".into()));
    };
    cfg.validate()?;
    let classes = match cfg.dataset.declared_classes() {
        Some(k) => k,
        None => cfg.dataset.load(&RngStream::new(cfg.seed).child("data"))?.classes(),
    };
    let dimension = defense.resolve(classes)?.dimension;
    let k_max = k_max.unwrap_or(2 * dimension);
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let root = RngStream::new(cfg.seed);
    let seeds: Vec<(u32, u64)> = (0..trials)
        .map(|t| (t, root.child_indexed("trial", u64::from(t)).seed()))
        .collect();
    let results = par_map(&seeds, workers, |&(trial, seed)| -> Result<InferKTrial> {
        let trial_cfg = ExperimentConfig { seed, ..cfg.clone() };
        let run = train_only(&trial_cfg)?;
        let window = match cfg.attacks.window {
            Some(w) => w,
            None => final_epoch_window(&run.outcome.tap)?,
        };
        let mut rng = RngStream::new(seed).child("infer_k");
        let k = infer_k_attack(&run.outcome.tap, window, k_max, DEFAULT_MAX_POINTS, &mut rng)?;
        log::info!("infer-k trial {trial}: guessed {}", k.guess);
        Ok(InferKTrial {
            trial,
            seed,
            guess: k.guess,
        })
    })?;
    Ok(InferKSummary {
        dimension,
        k_max,
        trials: results.into_iter().collect::<Result<_>>()?,
    })
}

pub fn histogram_file_name(cfg: &ExperimentConfig, trials: u32) -> Result<String> {
    Ok(format!("infer-k-{}-t{trials}.csv", run_id(cfg)?))
}

/// `guess,count` rows in ascending guess order.
pub fn write_histogram(path: &Path, summary: &InferKSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["guess", "count"]).map_err(csv_err)?;
    for (g, n) in summary.histogram() {
        w.write_record([g.to_string(), n.to_string()]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn cmd_infer_k(
    cfg: &ExperimentConfig,
    trials: u32,
    k_max: Option<usize>,
    workers: usize,
) -> Result<(InferKSummary, PathBuf)> {
    let summary = run_infer_k(cfg, trials, k_max, workers)?;
    let path = cfg.resolved_out_dir().join(histogram_file_name(cfg, trials)?);
    write_histogram(&path, &summary)?;
    Ok((summary, path))
}
