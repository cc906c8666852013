//! The deterministic 2D world: robot kinematics, scripted pedestrians,
//! collision detection and the sensing oracles.

pub mod region;
pub mod scenario;
pub mod sensing;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose, Vec2};
pub use region::{point_in_region, Region, RegionKind};
pub use scenario::{load_scenario, parse_scenario, FollowBandRule, GoalRule, Pedestrian, ScenarioSpec, TaskRules};
pub use sensing::{detect_entities, sense_lidar, Detection, DetectionKind, FovConfig, LidarConfig, LidarScan};

/// Below this angular rate the unicycle is integrated as a straight line.
pub const ARC_OMEGA_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
    pub radius: f64,
}

impl RobotState {
    pub fn position(&self) -> Vec2 {
        self.pose.position()
    }

    /// World-frame velocity vector.
    pub fn velocity(&self) -> Vec2 {
        self.pose.heading() * self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits {
    pub max_lin_vel: f64,
    pub max_rot_vel: f64,
}

impl Default for VelocityLimits {
    fn default() -> Self {
        Self { max_lin_vel: 1.0, max_rot_vel: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub v: f64,
    pub omega: f64,
}

impl Command {
    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionTarget {
    Pedestrian(String),
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub time: f64,
    pub target: CollisionTarget,
}

/// One world snapshot. Cloning is cheap: the scenario is shared.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Arc<ScenarioSpec>,
    time: f64,
    robot: RobotState,
    limits: VelocityLimits,
    /// Per-pedestrian offset added to sim time when sampling trajectories.
    phase: Vec<f64>,
}

impl World {
    pub fn new(scenario: Arc<ScenarioSpec>) -> Self {
        let robot = RobotState { pose: scenario.robot_start, v: 0.0, omega: 0.0, radius: scenario.robot_radius };
        let phase = vec![0.0; scenario.pedestrians.len()];
        Self { scenario, time: 0.0, robot, limits: VelocityLimits::default(), phase }
    }

    pub fn with_start(mut self, pose: Pose) -> Self {
        self.robot.pose = pose;
        self
    }

    pub fn with_phases(mut self, phase: Vec<f64>) -> Self {
        assert_eq!(phase.len(), self.scenario.pedestrians.len());
        self.phase = phase;
        self
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn scenario_arc(&self) -> &Arc<ScenarioSpec> {
        &self.scenario
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn limits(&self) -> VelocityLimits {
        self.limits
    }

    pub fn set_limits(&mut self, limits: VelocityLimits) {
        self.limits = limits;
    }

    pub fn pedestrian_position(&self, index: usize) -> Vec2 {
        self.scenario.pedestrians[index].position_at(self.time + self.phase[index])
    }

    /// `(pedestrian, current position)` pairs in scenario order.
    pub fn pedestrians(&self) -> impl Iterator<Item = (&Pedestrian, Vec2)> + '_ {
        self.scenario.pedestrians.iter().enumerate().map(|(k, p)| (p, self.pedestrian_position(k)))
    }

    pub fn pedestrian_by_id(&self, id: &str) -> Option<(&Pedestrian, Vec2)> {
        self.pedestrians().find(|(p, _)| p.id == id)
    }

    /// Advances the world by `dt` seconds of sim time.
    ///
    /// The command is clamped to the current velocity limits, the robot is
    /// integrated along the exact unicycle arc, pedestrians move along their
    /// trajectories and collisions at the new configuration are reported.
    pub fn step(&mut self, command: Command, dt: f64) -> Vec<CollisionEvent> {
        assert!(dt > 0.0, "dt must be positive");
        let v = command.v.clamp(-self.limits.max_lin_vel, self.limits.max_lin_vel);
        let omega = command.omega.clamp(-self.limits.max_rot_vel, self.limits.max_rot_vel);
        self.robot.pose = integrate_unicycle(self.robot.pose, v, omega, dt);
        self.robot.v = v;
        self.robot.omega = omega;
        self.time += dt;
        self.collisions()
    }

    /// Collisions at the current configuration.
    pub fn collisions(&self) -> Vec<CollisionEvent> {
        let mut events = Vec::new();
        let c = self.robot.position();
        for (ped, p) in self.pedestrians() {
            if c.distance(p) < self.robot.radius + ped.radius {
                events.push(CollisionEvent { time: self.time, target: CollisionTarget::Pedestrian(ped.id.clone()) });
            }
        }
        if self.scenario.static_map.disc_hits_occupied(c, self.robot.radius) {
            events.push(CollisionEvent { time: self.time, target: CollisionTarget::Obstacle });
        }
        events
    }
}

/// Exact unicycle integration; straight-line when `|omega| ≤ ARC_OMEGA_EPS`.
pub fn integrate_unicycle(pose: Pose, v: f64, omega: f64, dt: f64) -> Pose {
    let th = pose.theta;
    if omega.abs() > ARC_OMEGA_EPS {
        let th1 = th + omega * dt;
        let r = v / omega;
        Pose { x: pose.x + r * (th1.sin() - th.sin()), y: pose.y - r * (th1.cos() - th.cos()), theta: wrap_angle(th1) }
    } else {
        Pose { x: pose.x + v * th.cos() * dt, y: pose.y + v * th.sin() * dt, theta: wrap_angle(th + omega * dt) }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::grid::{GridGeometry, OccupancyGrid};

    pub fn open_scenario(size: usize, resolution: f64) -> ScenarioSpec {
        let g = GridGeometry::new(resolution, Vec2::ZERO, size, size);
        let extent = size as f64 * resolution;
        ScenarioSpec {
            id: "open".into(),
            instruction: String::new(),
            seed: 0,
            static_map: OccupancyGrid::empty(g),
            regions: vec![],
            pedestrians: vec![],
            robot_start: Pose::new(extent / 2.0, extent / 2.0, 0.0),
            robot_radius: 0.3,
            task: TaskRules {
                goal: GoalRule::Point { point: [extent / 2.0 + 1.0, extent / 2.0], radius: 0.3 },
                time_limit: 60.0,
                forbidden: vec![],
                caution: vec![],
                follow: None,
                keep_away: vec![],
                instruction_updates: vec![],
            },
        }
    }

    pub fn standing_pedestrian(id: &str, identity: &str, at: Vec2) -> Pedestrian {
        Pedestrian {
            id: id.into(),
            identity: identity.into(),
            radius: 0.3,
            vulnerable: false,
            trajectory: vec![[0.0, at.x, at.y]],
        }
    }
}
