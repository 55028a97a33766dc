//! Experiment driver: TOML configs, single runs, sweeps, `K` inference
//! trials and the aggregate report. Every command writes plain JSON and CSV
//! files; nothing is rendered.

mod config;
mod infer;
mod record;
mod report;
mod run;
mod sweep;

pub use config::{
    AttackSection, DatasetSpec, DefenseSection, ExperimentConfig, TrainSection, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
pub use infer::{cmd_infer_k, histogram_file_name, run_infer_k, write_histogram, InferKSummary, InferKTrial};
pub use record::{record_file_name, run_id, write_atomic, AttackEntry, RunRecord, RECORD_PREFIX};
pub use report::{cmd_report, read_records, report_rows, write_report_csv, ReportRow, REPORT_FILE};
pub use run::{
    cmd_train, pools_file_name, run_experiment, scores_file_name, train_only, write_run, RunArtifacts, TrainedRun,
};
pub use sweep::{cmd_sweep, run_sweep, summary_file_name, sweep_configs, write_sweep_summary, SweepAxis};

use crate::{Error, Result};

/// Maps `f` over `items` on a pool of `workers` threads, keeping input
/// order. Runs inline for one worker.
fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

impl Error {
    /// Process exit status for the CLI: 3 when training aborted, 2 for
    /// anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TrainingAborted { .. } => 3,
            _ => 2,
        }
    }
}
