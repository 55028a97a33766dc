use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{write_atomic, RunRecord, RECORD_PREFIX};
use super::sweep::csv_err;
use crate::attacks::AttackKind;
use crate::secdt::NormStandard;
use crate::{Error, Result};

/// One (run, attack) pair of the tradeoff table. Every field is copied from
/// a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run_id: String,
    /// `off` or `secdt`.
    pub defense: String,
    pub dimension: Option<usize>,
    pub noise_level: Option<f64>,
    pub norm_standard: Option<NormStandard>,
    pub test_utility: f64,
    pub attack: AttackKind,
    pub leak_metric: Option<f64>,
}

/// Reads every `run-*.json` in `dir`. Unreadable records are skipped with a
/// warning; finding none is an error.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        // attack and pool sidecars share the prefix but not the extension
        if !name.starts_with(RECORD_PREFIX) || !name.ends_with(".json") {
            continue;
        }
        match RunRecord::read(&path) {
            Ok(r) => records.push(r),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!("no run records in {}", dir.display())));
    }
    Ok(records)
}

/// Rows ordered by dimension, then noise, then run id; undefended runs come
/// first. Within a run, rows follow the record's attack order.
pub fn report_rows(records: &[RunRecord]) -> Vec<ReportRow> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    let key = |r: &RunRecord| {
        let d = r.config.defense.as_ref();
        (r.dimension.unwrap_or(0), d.map_or(-1.0, |d| d.noise_level), r.run_id.clone())
    };
    sorted.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
    });
    let mut rows = Vec::new();
    for r in sorted {
        let d = r.config.defense.as_ref();
        for a in &r.attacks {
            rows.push(ReportRow {
                run_id: r.run_id.clone(),
                defense: if d.is_some() { "secdt" } else { "off" }.into(),
                dimension: r.dimension,
                noise_level: d.map(|d| d.noise_level),
                norm_standard: d.map(|d| d.norm_standard),
                test_utility: r.utility.headline(),
                attack: a.attack,
                leak_metric: a.metric(),
            });
        }
    }
    rows
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record([
            "run_id",
            "defense",
            "dimension",
            "noise_level",
            "norm_standard",
            "test_utility",
            "attack",
            "leak_metric",
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub const REPORT_FILE: &str = "report.csv";

/// Aggregates the records in `dir` and writes `report.csv` next to them.
pub fn cmd_report(dir: &Path) -> Result<Vec<ReportRow>> {
    let rows = report_rows(&read_records(dir)?);
    write_report_csv(&dir.join(REPORT_FILE), &rows)?;
    Ok(rows)
}
