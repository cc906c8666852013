//! Trajectory export: per-tick CSV and an SVG overview.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EpisodeReport;
use crate::world::scenario::decode_rle_rows;
use crate::world::RegionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::Validation(format!("unknown export format `{other}`"))),
        }
    }
}

pub const CSV_META_PREFIX: &str = "# meta: ";

/// Everything in a report except the per-tick logs, carried in the CSV's
/// first line so the file alone reproduces the metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvMeta {
    pub ticks: usize,
    pub subjects: Vec<String>,
    pub report: EpisodeReport,
}

pub fn subject_ids(report: &EpisodeReport) -> Vec<String> {
    let ids: BTreeSet<&String> = report.subject_distances.iter().flat_map(|m| m.keys()).collect();
    ids.into_iter().cloned().collect()
}

/// Meta line, then a header and one row per tick:
/// `t,x,y,theta,v,omega,regions,d:<subject>...` with `;`-joined region ids.
pub fn export_csv(report: &EpisodeReport) -> Result<String> {
    let subjects = subject_ids(report);
    let mut stripped = report.clone();
    stripped.trajectory.samples.clear();
    stripped.region_occupancy.clear();
    stripped.subject_distances.clear();
    stripped.scene.pedestrian_paths.clear();
    let meta = CsvMeta { ticks: report.ticks(), subjects: subjects.clone(), report: stripped };
    let mut out = String::new();
    out.push_str(CSV_META_PREFIX);
    out.push_str(&serde_json::to_string(&meta).map_err(|e| Error::Log(e.to_string()))?);
    out.push('\n');

    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Log(e.to_string());
    let mut header: Vec<String> = ["t", "x", "y", "theta", "v", "omega", "regions"].map(String::from).to_vec();
    header.extend(subjects.iter().map(|s| format!("d:{s}")));
    w.write_record(&header).map_err(err)?;
    for (k, s) in report.trajectory.samples.iter().enumerate() {
        let mut row = vec![
            s.t.to_string(),
            s.pose.x.to_string(),
            s.pose.y.to_string(),
            s.pose.theta.to_string(),
            s.v.to_string(),
            s.omega.to_string(),
            report.region_occupancy.get(k).map(|r| r.join(";")).unwrap_or_default(),
        ];
        for id in &subjects {
            row.push(
                report.subject_distances.get(k).and_then(|m| m.get(id)).map(|d| d.to_string()).unwrap_or_default(),
            );
        }
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Log(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

const PX_PER_M: f64 = 40.0;

fn region_fill(kind: RegionKind) -> &'static str {
    match kind {
        RegionKind::Goal => "#4caf50",
        RegionKind::Forbidden => "#e53935",
        RegionKind::Caution => "#fdd835",
        RegionKind::Neutral => "#90a4ae",
    }
}

/// Map, shaded regions, pedestrian and robot paths, and a marker where each
/// directive took effect.
pub fn export_svg(report: &EpisodeReport) -> Result<String> {
    let sc = &report.scene;
    let (w_m, h_m) = (sc.width as f64 * sc.resolution, sc.height as f64 * sc.resolution);
    let px = |x: f64| (x - sc.origin[0]) * PX_PER_M;
    let py = |y: f64| (h_m - (y - sc.origin[1])) * PX_PER_M;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.1} {:.1}">"#,
        w_m * PX_PER_M,
        h_m * PX_PER_M,
        w_m * PX_PER_M,
        h_m * PX_PER_M
    );
    let _ =
        writeln!(s, r##"<rect class="map" x="0" y="0" width="100%" height="100%" fill="#ffffff" stroke="#000000"/>"##);

    if !sc.rows.is_empty() {
        let rows = decode_rle_rows(&sc.rows, sc.width)?;
        let cell = sc.resolution * PX_PER_M;
        let _ = writeln!(s, r##"<g class="walls" fill="#333333">"##);
        for (r, row) in rows.iter().enumerate() {
            let mut i = 0;
            while i < row.len() {
                if !row[i] {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < row.len() && row[i] {
                    i += 1;
                }
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}"/>"#,
                    start as f64 * cell,
                    r as f64 * cell,
                    (i - start) as f64 * cell,
                    cell
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }

    for r in &report.regions {
        let pts: Vec<String> = r.polygon.iter().map(|v| format!("{:.1},{:.1}", px(v.x), py(v.y))).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="region" data-id="{}" points="{}" fill="{}" fill-opacity="0.35" stroke="{}"/>"#,
            r.id,
            pts.join(" "),
            region_fill(r.kind),
            region_fill(r.kind)
        );
    }
    for (id, path) in &sc.pedestrian_paths {
        let pts: Vec<String> = path.iter().map(|p| format!("{:.1},{:.1}", px(p[0]), py(p[1]))).collect();
        let _ = writeln!(
            s,
            r##"<polyline class="pedestrian" data-id="{id}" points="{}" fill="none" stroke="#8e24aa" stroke-width="2" stroke-dasharray="6 4"/>"##,
            pts.join(" ")
        );
    }
    let pts: Vec<String> =
        report.trajectory.samples.iter().map(|p| format!("{:.1},{:.1}", px(p.pose.x), py(p.pose.y))).collect();
    let _ = writeln!(
        s,
        r##"<polyline class="robot" points="{}" fill="none" stroke="#1e88e5" stroke-width="3"/>"##,
        pts.join(" ")
    );
    for a in &report.directives {
        let k = report.trajectory.samples.partition_point(|p| p.t < a.applied_at);
        let Some(p) = report.trajectory.samples.get(k.min(report.ticks().saturating_sub(1))) else { continue };
        let _ = writeln!(
            s,
            r##"<circle class="directive" data-mode="{}" cx="{:.1}" cy="{:.1}" r="6" fill="#ff9800"/>"##,
            a.directive.mode.as_str(),
            px(p.pose.x),
            py(p.pose.y)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_export(report: &EpisodeReport, format: ExportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => export_csv(report)?,
        ExportFormat::Svg => export_svg(report)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
