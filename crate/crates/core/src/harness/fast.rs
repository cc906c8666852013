//! One fast-loop tick: costmap update, path tracking, forces, command.

use serde::{Deserialize, Serialize};

use crate::costmap::{CostmapStack, SocialEntityAttr};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::metrics::AppliedDirective;
use crate::modulator::{Directive, GoalSpec, Mode};
use crate::planner::{
    combine_forces, compute_desired_force, compute_obstacle_force, compute_social_force, force_to_cmd,
    plan_global_path, ForceBreakdown, GroupForce, NoGroupForce, SfmParams, SocialAgent,
};
use crate::world::{sense_lidar, Command, LidarConfig, ScenarioSpec, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastLoopConfig {
    pub lidar: LidarConfig,
    /// Seconds between global replans.
    pub replan_period: f64,
    /// Carrot distance along the global path, meters.
    pub lookahead: f64,
    /// Build the social layer from markers; off for ablations.
    pub social_layer: bool,
    /// Turn rate used while exploring without a goal, as a fraction of `max_rot_vel`.
    pub explore_turn: f64,
}

impl Default for FastLoopConfig {
    fn default() -> Self {
        FastLoopConfig {
            lidar: LidarConfig::default(),
            replan_period: 1.0,
            lookahead: 1.0,
            social_layer: true,
            explore_turn: 0.5,
        }
    }
}

/// The parameter, marker and goal set the fast loop currently runs under.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveDirective {
    pub mode: Mode,
    pub params: SfmParams,
    pub markers: Vec<SocialEntityAttr>,
    pub goal: Option<GoalSpec>,
    /// The directive this state came from; `None` before the first one.
    pub source: Option<Directive>,
}

impl ActiveDirective {
    /// Holds position under the base parameters until told otherwise.
    pub fn initial(base: SfmParams) -> Self {
        ActiveDirective { mode: Mode::Idle, params: base, markers: Vec::new(), goal: None, source: None }
    }

    /// Every field derived from `base` and one directive, or an error and nothing.
    pub fn from_directive(base: &SfmParams, d: &Directive) -> Result<Self> {
        d.validate()?;
        Ok(ActiveDirective {
            mode: d.mode,
            params: base.apply_param_update(&d.param_updates)?,
            markers: d.markers.clone(),
            goal: d.goal.clone(),
            source: Some(d.clone()),
        })
    }

    /// Whether all fields agree with the source directive.
    pub fn is_consistent(&self, base: &SfmParams) -> bool {
        match &self.source {
            None => self.params == *base && self.markers.is_empty() && self.goal.is_none(),
            Some(d) => {
                base.apply_param_update(&d.param_updates).is_ok_and(|p| p == self.params)
                    && self.mode == d.mode
                    && self.markers == d.markers
                    && self.goal == d.goal
            }
        }
    }

    pub fn follow_target(&self) -> Option<&SocialEntityAttr> {
        if self.mode != Mode::Follow {
            return None;
        }
        self.markers.iter().find(|m| m.band.is_some())
    }
}

/// Where the robot is steering this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Steering {
    Hold,
    Spin,
    Waypoint(Vec2),
}

pub struct FastLoop {
    cfg: FastLoopConfig,
    stack: CostmapStack,
    base: SfmParams,
    active: ActiveDirective,
    group: Box<dyn GroupForce + Send>,
    path: Vec<Vec2>,
    path_cursor: usize,
    last_plan: Option<f64>,
    replan: bool,
    unresolved: Vec<String>,
    last_forces: ForceBreakdown,
}

impl FastLoop {
    pub fn new(scenario: &ScenarioSpec, base: SfmParams, cfg: FastLoopConfig) -> Result<Self> {
        base.validate()?;
        if !(cfg.replan_period > 0.0 && cfg.lookahead > 0.0) {
            return Err(Error::Validation("replan_period and lookahead must be > 0".into()));
        }
        let stack = CostmapStack::from_static_map(&scenario.static_map, scenario.robot_radius);
        Ok(FastLoop {
            cfg,
            stack,
            active: ActiveDirective::initial(base.clone()),
            base,
            group: Box::new(NoGroupForce),
            path: Vec::new(),
            path_cursor: 0,
            last_plan: None,
            replan: true,
            unresolved: Vec::new(),
            last_forces: ForceBreakdown::default(),
        })
    }

    pub fn set_group_force(&mut self, g: Box<dyn GroupForce + Send>) {
        self.group = g;
    }

    pub fn config(&self) -> &FastLoopConfig {
        &self.cfg
    }

    pub fn stack(&self) -> &CostmapStack {
        &self.stack
    }

    pub fn active(&self) -> &ActiveDirective {
        &self.active
    }

    pub fn base_params(&self) -> &SfmParams {
        &self.base
    }

    pub fn path(&self) -> &[Vec2] {
        &self.path
    }

    pub fn last_forces(&self) -> ForceBreakdown {
        self.last_forces
    }

    /// Marker ids that could not be anchored since the last call.
    pub fn take_unresolved(&mut self) -> Vec<String> {
        std::mem::take(&mut self.unresolved)
    }

    /// Swaps in `d` as a whole. Parameters always derive from the base set,
    /// so one directive's limits never leak into the next.
    pub fn apply(&mut self, d: Directive, now: f64, world: &mut World) -> Result<AppliedDirective> {
        let next = ActiveDirective::from_directive(&self.base, &d)?;
        world.set_limits(next.params.velocity_limits());
        let params_after = next.params.clone();
        self.active = next;
        self.replan = true;
        Ok(AppliedDirective { directive: d, applied_at: now, params_after })
    }

    /// Markers with positions taken from the current world: pedestrians by
    /// their live position, regions by their polygon.
    pub fn resolve_markers(&mut self, world: &World) -> Vec<SocialEntityAttr> {
        let scenario = world.scenario();
        let mut out = Vec::with_capacity(self.active.markers.len());
        for m in &self.active.markers {
            let mut m = m.clone();
            if let Some((_, at)) = world.pedestrian_by_id(&m.entity_id) {
                m.position = Some(at);
            } else if let Some(r) = scenario.region(&m.entity_id) {
                m.footprint = Some(r.polygon.clone());
            }
            if m.is_anchored() {
                out.push(m);
            } else if !self.unresolved.contains(&m.entity_id) {
                self.unresolved.push(m.entity_id.clone());
            }
        }
        out
    }

    fn goal_point(&self, scenario: &ScenarioSpec) -> Option<Vec2> {
        match self.active.goal.as_ref()? {
            GoalSpec::Point { x, y } => Some(Vec2::new(*x, *y)),
            GoalSpec::Region { region_id } => scenario.region(region_id).map(|r| r.anchor_point()),
        }
    }

    fn steering(&mut self, world: &World) -> Result<Steering> {
        let here = world.robot().position();
        if let Some(target) = self.active.follow_target() {
            let Some((_, at)) = world.pedestrian_by_id(&target.entity_id) else {
                return Ok(Steering::Hold);
            };
            let band = target.band.expect("follow targets carry a band");
            // close enough: let the band force do the work
            let standoff = 0.5 * (band.d_min + band.d_max);
            return Ok(if here.distance(at) > standoff { Steering::Waypoint(at) } else { Steering::Hold });
        }
        let Some(goal) = self.goal_point(world.scenario()) else {
            return Ok(if self.active.mode == Mode::Explore { Steering::Spin } else { Steering::Hold });
        };
        if self.active.mode == Mode::Idle {
            return Ok(Steering::Hold);
        }
        let now = world.time();
        let due = self.last_plan.is_none_or(|t| now - t >= self.cfg.replan_period - 1e-9);
        if self.replan || due {
            self.replan = false;
            self.last_plan = Some(now);
            match plan_global_path(&self.stack, here, goal) {
                Ok(p) => {
                    self.path = p;
                    self.path_cursor = 0;
                }
                Err(Error::NoPath) | Err(Error::OutOfBounds { .. }) => {
                    if self.path.is_empty() {
                        self.path = vec![goal];
                        self.path_cursor = 0;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        while self.path_cursor + 1 < self.path.len() && here.distance(self.path[self.path_cursor]) < self.cfg.lookahead
        {
            self.path_cursor += 1;
        }
        Ok(Steering::Waypoint(self.path.get(self.path_cursor).copied().unwrap_or(goal)))
    }

    /// Computes this tick's command from the current world. The world is
    /// not advanced here.
    pub fn step(&mut self, world: &World, dt: f64) -> Result<Command> {
        let robot = *world.robot();
        let scan = sense_lidar(world, &robot.pose, &self.cfg.lidar);
        self.stack.update_obstacle_layer(&scan, &robot.pose);
        if self.cfg.social_layer {
            let markers = self.resolve_markers(world);
            self.stack.apply_social_entities(&markers)?;
        } else {
            self.stack.clear_social();
        }
        self.stack.merge_layers();

        let steering = self.steering(world)?;
        let params = &self.active.params;
        let follow = self.active.follow_target().cloned();
        let range = self.cfg.lidar.max_range;
        let agents: Vec<SocialAgent> = world
            .pedestrians()
            .filter(|(_, at)| at.distance(robot.position()) <= range)
            .map(|(p, at)| SocialAgent {
                id: p.id.clone(),
                position: at,
                radius: p.radius,
                follow_target: follow.as_ref().is_some_and(|f| f.entity_id == p.id),
            })
            .collect();
        // the band force uses the target marker's band
        let band_params;
        let social_params = match follow.as_ref().and_then(|f| f.band) {
            Some(b) => {
                band_params = SfmParams { d_min: b.d_min, d_max: b.d_max, ..params.clone() };
                &band_params
            }
            None => params,
        };
        let desired = match steering {
            Steering::Waypoint(w) => compute_desired_force(&robot, w, params),
            Steering::Hold | Steering::Spin => Vec2::ZERO,
        };
        let obstacle = compute_obstacle_force(&robot, &self.stack, params);
        let social = compute_social_force(&robot, &agents, social_params);
        let group = self.group.group_force(&robot, &agents, params);
        self.last_forces = combine_forces(desired, obstacle, social, group);
        let cmd = match steering {
            Steering::Spin => Command::new(0.0, self.cfg.explore_turn * params.max_rot_vel),
            // idle coasts to a stop whatever the forces
            _ if self.active.mode == Mode::Idle => force_to_cmd(Vec2::ZERO, &robot, params, dt),
            _ => force_to_cmd(self.last_forces.total, &robot, params, dt),
        };
        Ok(cmd)
    }
}

/// 20 Hz.
pub const DEFAULT_DT: f64 = 0.05;
