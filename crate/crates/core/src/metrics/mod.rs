//! Benchmark metrics over episode reports, and batch aggregation.

pub mod report;
pub mod scores;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::fnv1a64;

pub use report::{
    AppliedDirective, Component, EpisodeEvent, EpisodeMetrics, EpisodeReport, FailureReason, LatencySample, Outcome,
    SceneSummary, Trajectory, TrajectorySample,
};
pub use scores::{
    compute_metrics, curvature_smoothness, evaluate_episode, latency_stats, region_score, smoothness_score,
    sorted_mean, subject_score, wrap, LatencyStats, SubjectMode,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Follow score lost across the whole gap below `d_min`.
    pub below_band_slope: f64,
    /// Follow score lost per meter beyond `d_max`.
    pub above_band_slope: f64,
    /// Keep-away distance earning the full score, meters.
    pub d_safe: f64,
    /// Largest penalty one region can contribute.
    pub cap_per_region: f64,
    /// Minimum post-acquisition in-band fraction for follow success.
    pub band_threshold: f64,
    /// Any collision fails the episode.
    pub strict_collisions: bool,
    /// Trajectory segments shorter than this are merged, meters.
    pub segment_merge: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            below_band_slope: 50.0,
            above_band_slope: 25.0,
            d_safe: 1.5,
            cap_per_region: 100.0,
            band_threshold: 0.8,
            strict_collisions: false,
            segment_merge: 0.01,
        }
    }
}

impl MetricsConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: MetricsConfig = toml::from_str(text).map_err(|e| Error::parse("metrics config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        MetricsConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.below_band_slope, self.above_band_slope, self.cap_per_region, self.segment_merge];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("metrics coefficients must be finite and ≥ 0".into()));
        }
        if !(self.d_safe > 0.0) {
            return Err(Error::Validation("d_safe must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.band_threshold) {
            return Err(Error::Validation("band_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Fingerprint stored in reports so replays can detect a changed config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

/// One results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub episodes: usize,
    /// Percent.
    pub success_rate: f64,
    /// Percent of episodes with at least one collision.
    pub collision_rate: f64,
    pub curvature: Option<f64>,
    pub smoothness_score: Option<f64>,
    pub subject_score: Option<f64>,
    pub region_score: Option<f64>,
}

/// Aggregates episodes of one task; the result does not depend on their order.
pub fn aggregate(task: &str, episodes: &[EpisodeMetrics]) -> TaskSummary {
    let n = episodes.len();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let mean_of = |f: fn(&EpisodeMetrics) -> Option<f64>| sorted_mean(episodes.iter().filter_map(f).collect());
    TaskSummary {
        task: task.to_string(),
        episodes: n,
        success_rate: pct(episodes.iter().filter(|m| m.success).count()),
        collision_rate: pct(episodes.iter().filter(|m| m.collided).count()),
        curvature: mean_of(|m| m.curvature),
        smoothness_score: mean_of(|m| m.smoothness_score),
        subject_score: mean_of(|m| m.subject_score),
        region_score: mean_of(|m| m.region_score),
    }
}
