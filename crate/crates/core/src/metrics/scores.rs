//! Episode metrics: smoothness, subject and region scores, outcome, latency.

use std::collections::BTreeMap;

use crate::geometry::{wrap_angle, Vec2};
use crate::world::{GoalRule, TaskRules};

use super::report::{Component, EpisodeMetrics, EpisodeReport, FailureReason, LatencySample, Outcome};
use super::MetricsConfig;

/// Angle wrapped to `(−π, π]`.
pub fn wrap(angle: f64) -> f64 {
    wrap_angle(angle)
}

/// Drops points closer than `eps` to the last kept one; a short tail is
/// folded into the final segment.
pub fn merge_short_segments(points: &[Vec2], eps: f64) -> Vec<Vec2> {
    let mut kept: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        match kept.last() {
            Some(&last) if last.distance(p) < eps => {}
            _ => kept.push(p),
        }
    }
    if let (Some(&end), true) = (points.last(), kept.len() >= 2) {
        let n = kept.len();
        if kept[n - 1] != end {
            kept[n - 1] = end;
        }
    }
    kept
}

/// `Σ |wrap(α_{i+1} − α_i)|` over headings of consecutive merged segments.
/// `None` for fewer than 3 samples.
pub fn curvature_smoothness(points: &[Vec2], merge_eps: f64) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let merged = merge_short_segments(points, merge_eps);
    let headings: Vec<f64> = merged.windows(2).map(|w| (w[1] - w[0]).angle()).collect();
    Some(headings.windows(2).map(|h| wrap(h[1] - h[0]).abs()).sum())
}

/// Display score `100 / (1 + curvature)`; higher is smoother.
pub fn smoothness_score(curvature: f64) -> f64 {
    100.0 / (1.0 + curvature)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubjectMode {
    FollowBand { d_min: f64, d_max: f64 },
    KeepAway,
}

pub fn follow_band_tick_score(d: f64, d_min: f64, d_max: f64, cfg: &MetricsConfig) -> f64 {
    if d < d_min {
        (100.0 - cfg.below_band_slope * (d_min - d) / d_min).max(0.0)
    } else if d > d_max {
        (100.0 - cfg.above_band_slope * (d - d_max)).max(0.0)
    } else {
        100.0
    }
}

pub fn keep_away_tick_score(d: f64, cfg: &MetricsConfig) -> f64 {
    100.0 * (d / cfg.d_safe).clamp(0.0, 1.0)
}

/// Subjects the task scores: the follow target, then keep-away pedestrians.
pub fn scored_subjects(task: &TaskRules) -> Vec<(String, SubjectMode)> {
    let mut out = Vec::new();
    if let Some(f) = &task.follow {
        out.push((f.target.clone(), SubjectMode::FollowBand { d_min: f.d_min, d_max: f.d_max }));
    }
    for id in &task.keep_away {
        out.push((id.clone(), SubjectMode::KeepAway));
    }
    out
}

/// Tick indices at which the follow subject is scored.
fn follow_ticks(report: &EpisodeReport) -> std::ops::Range<usize> {
    let n = report.ticks();
    match report.acquisition_time() {
        Some(t0) => {
            let start = report.trajectory.samples.partition_point(|s| s.t < t0 - 1e-9);
            start..n
        }
        None => 0..n,
    }
}

/// Mean over ticks, then over subjects. `None` when nothing is scored.
pub fn subject_score(report: &EpisodeReport, subjects: &[(String, SubjectMode)], cfg: &MetricsConfig) -> Option<f64> {
    let mut per_subject = Vec::new();
    for (id, mode) in subjects {
        let ticks = match mode {
            SubjectMode::FollowBand { .. } => follow_ticks(report),
            SubjectMode::KeepAway => 0..report.ticks(),
        };
        let scores: Vec<f64> = report.subject_distances[ticks]
            .iter()
            .filter_map(|m| m.get(id))
            .map(|&d| match *mode {
                SubjectMode::FollowBand { d_min, d_max } => follow_band_tick_score(d, d_min, d_max, cfg),
                SubjectMode::KeepAway => keep_away_tick_score(d, cfg),
            })
            .collect();
        if let Some(m) = sorted_mean(scores) {
            per_subject.push(m);
        }
    }
    sorted_mean(per_subject)
}

/// Regions the score is computed over: hard then soft rule regions.
pub fn rule_regions(task: &TaskRules) -> Vec<String> {
    task.forbidden.iter().chain(&task.caution).cloned().collect()
}

/// `100 − Σ_r min(cap, mean per-tick severity of r)`, floored at 0.
pub fn region_score(report: &EpisodeReport, rule_regions: &[String], cfg: &MetricsConfig) -> Option<f64> {
    if rule_regions.is_empty() {
        return None;
    }
    let n = report.ticks();
    if n == 0 {
        return Some(100.0);
    }
    let mut penalty = 0.0;
    for id in rule_regions {
        let severity = report.region(id).map_or(0.0, |r| r.severity_weight);
        let inside = report.region_occupancy.iter().filter(|ids| ids.iter().any(|x| x == id)).count();
        penalty += (severity * inside as f64 / n as f64).min(cfg.cap_per_region);
    }
    Some((100.0 - penalty).clamp(0.0, 100.0))
}

/// Fraction of post-acquisition ticks with the target inside the band.
pub fn band_fraction(report: &EpisodeReport, task: &TaskRules) -> Option<f64> {
    let f = task.follow.as_ref()?;
    let ticks = follow_ticks(report);
    let ds: Vec<f64> = report.subject_distances[ticks].iter().filter_map(|m| m.get(&f.target).copied()).collect();
    if ds.is_empty() {
        return Some(0.0);
    }
    let inside = ds.iter().filter(|&&d| d >= f.d_min && d <= f.d_max).count();
    Some(inside as f64 / ds.len() as f64)
}

pub fn forbidden_ticks(report: &EpisodeReport, task: &TaskRules) -> usize {
    report.region_occupancy.iter().filter(|ids| ids.iter().any(|id| task.forbidden.contains(id))).count()
}

pub fn goal_reached(report: &EpisodeReport, task: &TaskRules) -> bool {
    let Some(last) = report.trajectory.samples.last() else { return false };
    let p = last.pose.position();
    match &task.goal {
        GoalRule::Region { region } => report.region(region).is_some_and(|r| r.contains(p)),
        GoalRule::Point { point, radius } => p.distance(Vec2::new(point[0], point[1])) <= *radius,
    }
}

/// Success needs the goal within the time limit, no hard-forbidden tick and,
/// for follow tasks, enough band maintenance. Collisions only fail the
/// episode in strict mode.
pub fn evaluate_episode(report: &EpisodeReport, task: &TaskRules, cfg: &MetricsConfig) -> Outcome {
    let collided = !report.collisions.is_empty();
    let aborted = report.events.iter().any(|e| e.kind == "abort");
    let in_time = report.trajectory.samples.last().is_some_and(|s| s.t <= task.time_limit + 1e-9);
    let reason = if aborted {
        Some(FailureReason::Aborted)
    } else if forbidden_ticks(report, task) > 0 {
        Some(FailureReason::SemanticViolation)
    } else if band_fraction(report, task).is_some_and(|f| f < cfg.band_threshold) {
        Some(FailureReason::BandViolation)
    } else if cfg.strict_collisions && collided {
        Some(FailureReason::Collision)
    } else if !(in_time && goal_reached(report, task)) {
        Some(FailureReason::Timeout)
    } else {
        None
    };
    Outcome { success: reason.is_none(), reason, collided }
}

/// Every per-episode metric, recomputed from the logs alone.
pub fn compute_metrics(report: &EpisodeReport, cfg: &MetricsConfig) -> EpisodeMetrics {
    let task = &report.task;
    let outcome = evaluate_episode(report, task, cfg);
    let curvature = curvature_smoothness(&report.trajectory.positions(), cfg.segment_merge);
    EpisodeMetrics {
        success: outcome.success,
        collided: outcome.collided,
        curvature,
        smoothness_score: curvature.map(smoothness_score),
        subject_score: subject_score(report, &scored_subjects(task), cfg),
        region_score: region_score(report, &rule_regions(task), cfg),
        band_fraction: band_fraction(report, task),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank percentile of ascending `sorted`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Per-component statistics; components without samples are absent.
pub fn latency_stats(log: &[LatencySample]) -> BTreeMap<Component, LatencyStats> {
    let mut by: BTreeMap<Component, Vec<f64>> = BTreeMap::new();
    for s in log {
        by.entry(s.component).or_default().push(s.ms);
    }
    by.into_iter()
        .map(|(c, mut v)| {
            v.sort_by(f64::total_cmp);
            let stats = LatencyStats {
                count: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                p50: percentile(&v, 0.5),
                p95: percentile(&v, 0.95),
                max: v[v.len() - 1],
            };
            (c, stats)
        })
        .collect()
}

/// Mean summed in ascending order, so the result ignores input order.
pub fn sorted_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}
