//! Per-episode records consumed by the metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::modulator::Directive;
use crate::planner::SfmParams;
use crate::world::{CollisionEvent, Region, TaskRules};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
}

/// Time-ordered robot samples, one per tick after the step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn is_monotonic(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].t > w[0].t)
    }

    pub fn positions(&self) -> Vec<crate::geometry::Vec2> {
        self.samples.iter().map(|s| s.pose.position()).collect()
    }
}

/// A directive as it took effect on the fast loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedDirective {
    pub directive: Directive,
    pub applied_at: f64,
    /// Full parameter vector in force after application.
    pub params_after: SfmParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    SlowDecide,
    FastStep,
}

impl Component {
    pub fn as_str(self) -> &'static str {
        match self {
            Component::SlowDecide => "slow_decide",
            Component::FastStep => "fast_step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub component: Component,
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    SemanticViolation,
    BandViolation,
    Collision,
    Timeout,
    Aborted,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::SemanticViolation => "semantic_violation",
            FailureReason::BandViolation => "band_violation",
            FailureReason::Collision => "collision",
            FailureReason::Timeout => "timeout",
            FailureReason::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub reason: Option<FailureReason>,
    pub collided: bool,
}

/// Metric values of one episode; `None` where a metric does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub collided: bool,
    pub curvature: Option<f64>,
    pub smoothness_score: Option<f64>,
    pub subject_score: Option<f64>,
    pub region_score: Option<f64>,
    pub band_fraction: Option<f64>,
}

/// Non-fatal slow-loop incidents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvent {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

/// Static scene in a form the exporters can draw without the scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
    /// Run-length rows, top row first.
    pub rows: Vec<String>,
    /// Pedestrian id to sampled path, one point per tick.
    pub pedestrian_paths: BTreeMap<String, Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario_id: String,
    pub seed: u64,
    pub instruction: String,
    pub dt: f64,
    pub injected_latency: f64,
    pub metrics_config_hash: String,
    pub task: TaskRules,
    pub regions: Vec<Region>,
    pub scene: SceneSummary,
    pub trajectory: Trajectory,
    pub collisions: Vec<CollisionEvent>,
    /// Ids of the regions containing the robot, per tick.
    pub region_occupancy: Vec<Vec<String>>,
    /// Distance to each scored subject, per tick.
    pub subject_distances: Vec<BTreeMap<String, f64>>,
    pub directives: Vec<AppliedDirective>,
    pub events: Vec<EpisodeEvent>,
    pub outcome: Outcome,
    pub metrics: EpisodeMetrics,
    /// Wall-clock timings; kept out of the serialized report so identical
    /// seeds give identical documents.
    #[serde(skip)]
    pub latency_log: Vec<LatencySample>,
}

impl EpisodeReport {
    pub fn ticks(&self) -> usize {
        self.trajectory.samples.len()
    }

    /// Whether every per-tick log has one entry per trajectory sample.
    pub fn logs_aligned(&self) -> bool {
        let n = self.ticks();
        self.region_occupancy.len() == n && self.subject_distances.len() == n
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    /// Issue time of the first applied Follow directive.
    pub fn acquisition_time(&self) -> Option<f64> {
        self.directives
            .iter()
            .find(|a| a.directive.mode == crate::modulator::Mode::Follow)
            .map(|a| a.directive.issued_at)
    }
}
