//! Recomputes metrics from recorded logs.

use std::collections::BTreeMap;
use std::path::Path;

use super::export::{CsvMeta, CSV_META_PREFIX};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::metrics::{
    compute_metrics, evaluate_episode, EpisodeMetrics, EpisodeReport, MetricsConfig, Outcome, TrajectorySample,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub metrics: EpisodeMetrics,
    pub outcome: Outcome,
    /// Recomputed metrics equal the recorded ones.
    pub matches_report: bool,
    /// The log was scored under a different metrics config.
    pub config_mismatch: bool,
}

pub fn load_report(path: &Path) -> Result<EpisodeReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        if e.is_eof() {
            Error::Log(format!("{}: truncated report", path.display()))
        } else {
            Error::parse(path.display().to_string(), e.to_string())
        }
    })
}

pub fn replay_report(report: &EpisodeReport, cfg: &MetricsConfig) -> Result<ReplayOutcome> {
    if !report.trajectory.is_monotonic() {
        return Err(Error::Log("trajectory timestamps are not strictly increasing".into()));
    }
    if !report.logs_aligned() {
        return Err(Error::Log(format!(
            "truncated log: {} samples, {} occupancy rows, {} distance rows",
            report.ticks(),
            report.region_occupancy.len(),
            report.subject_distances.len()
        )));
    }
    let metrics = compute_metrics(report, cfg);
    let outcome = evaluate_episode(report, &report.task, cfg);
    Ok(ReplayOutcome {
        metrics,
        outcome,
        matches_report: metrics == report.metrics && outcome == report.outcome,
        config_mismatch: report.metrics_config_hash != cfg.hash(),
    })
}

fn field(rec: &csv::StringRecord, k: usize, name: &str, row: usize) -> Result<f64> {
    rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Log(format!("row {row}: bad or missing `{name}`")))
}

/// Rebuilds a report from exported CSV text.
pub fn report_from_csv(text: &str) -> Result<EpisodeReport> {
    let (first, body) = text.split_once('\n').ok_or_else(|| Error::Log("empty trajectory csv".into()))?;
    let meta =
        first.strip_prefix(CSV_META_PREFIX).ok_or_else(|| Error::Log("trajectory csv lacks its meta line".into()))?;
    let meta: CsvMeta = serde_json::from_str(meta).map_err(|e| Error::parse("csv meta", e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(body.as_bytes());
    let mut report = meta.report;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Log(format!("truncated or malformed csv: {e}")))?;
        let f = |k: usize, name: &str| field(&rec, k, name, row);
        report.trajectory.samples.push(TrajectorySample {
            t: f(0, "t")?,
            pose: Pose { x: f(1, "x")?, y: f(2, "y")?, theta: f(3, "theta")? },
            v: f(4, "v")?,
            omega: f(5, "omega")?,
        });
        let regions = rec.get(6).unwrap_or("");
        report.region_occupancy.push(if regions.is_empty() {
            vec![]
        } else {
            regions.split(';').map(String::from).collect()
        });
        let mut d = BTreeMap::new();
        for (j, id) in meta.subjects.iter().enumerate() {
            let cell = rec.get(7 + j).unwrap_or("");
            if !cell.is_empty() {
                d.insert(id.clone(), field(&rec, 7 + j, id, row)?);
            }
        }
        report.subject_distances.push(d);
    }
    if report.ticks() != meta.ticks {
        return Err(Error::Log(format!("truncated csv: {} of {} rows", report.ticks(), meta.ticks)));
    }
    Ok(report)
}

pub fn replay_csv(text: &str, cfg: &MetricsConfig) -> Result<ReplayOutcome> {
    replay_report(&report_from_csv(text)?, cfg)
}

/// Replays a `.json` report or an exported `.csv` trajectory.
pub fn replay_path(path: &Path, cfg: &MetricsConfig) -> Result<ReplayOutcome> {
    if path.extension().is_some_and(|e| e == "csv") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        replay_csv(&text, cfg)
    } else {
        replay_report(&load_report(path)?, cfg)
    }
}
