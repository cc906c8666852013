//! Social-force terms and their combination.

use serde::{Deserialize, Serialize};

use crate::costmap::CostmapStack;
use crate::geometry::Vec2;
use crate::planner::SfmParams;
use crate::world::RobotState;

/// Obstacle cells farther than this many `obstacle_range` lengths are ignored.
pub const OBSTACLE_CUTOFF_RANGES: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceBreakdown {
    pub desired: Vec2,
    pub obstacle: Vec2,
    pub social: Vec2,
    pub group: Vec2,
    pub total: Vec2,
}

/// Another agent as seen by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialAgent {
    pub id: String,
    pub position: Vec2,
    pub radius: f64,
    /// The designated follow target uses the band force instead of repulsion.
    pub follow_target: bool,
}

/// Relaxation toward `desired_speed` along the direction to `waypoint`.
pub fn compute_desired_force(state: &RobotState, waypoint: Vec2, params: &SfmParams) -> Vec2 {
    let Some(e_goal) = (waypoint - state.position()).normalized(1e-6) else {
        return Vec2::ZERO;
    };
    let gain = params.sfm_goal_weight * params.force_factor_desired / params.relaxation_time;
    (e_goal * params.desired_speed - state.velocity()) * gain
}

/// Exponential repulsion from physically lethal cells near the robot.
pub fn compute_obstacle_force(state: &RobotState, stack: &CostmapStack, params: &SfmParams) -> Vec2 {
    let weight = params.sfm_obstacle_weight * params.force_factor_obstacle * params.obstacle_amplitude;
    if weight == 0.0 {
        return Vec2::ZERO;
    }
    let g = stack.geometry();
    let here = state.position();
    let cutoff = params.obstacle_range * OBSTACLE_CUTOFF_RANGES;
    let Some((i0, j0, i1, j1)) = g.window(here, cutoff) else {
        return Vec2::ZERO;
    };
    let mut force = Vec2::ZERO;
    for j in j0..=j1 {
        for i in i0..=i1 {
            if !stack.physically_lethal(g.index(i, j)) {
                continue;
            }
            let away = here - g.cell_center(i, j);
            let d = away.norm();
            if d > cutoff || d < 1e-9 {
                continue;
            }
            let mag = weight * ((state.radius - d) / params.obstacle_range).exp();
            force += away * (mag / d);
        }
    }
    force
}

/// Band force toward a follow target: repulsion inside `d_min`, attraction
/// beyond `d_max`, nothing in between.
pub fn follow_band_force(robot: Vec2, target: Vec2, params: &SfmParams) -> Vec2 {
    let to_target = target - robot;
    let d = to_target.norm();
    let Some(e) = to_target.normalized(1e-9) else {
        return Vec2::ZERO;
    };
    let repel = params.k_rep * (params.d_min - d).max(0.0);
    let attract = params.k_att * (d - params.d_max).max(0.0);
    -e * repel + e * attract
}

/// Sum of agent interactions, scaled by `sfm_people_weight · force_factor_social`.
///
/// The follow target contributes the band force; every other agent an
/// exponential repulsion over the gap between the two discs.
pub fn compute_social_force(state: &RobotState, agents: &[SocialAgent], params: &SfmParams) -> Vec2 {
    let weight = params.sfm_people_weight * params.force_factor_social;
    if weight == 0.0 {
        return Vec2::ZERO;
    }
    let here = state.position();
    let mut force = Vec2::ZERO;
    for agent in agents {
        if agent.follow_target {
            force += follow_band_force(here, agent.position, params);
            continue;
        }
        let away = here - agent.position;
        let d = away.norm();
        if d < 1e-9 {
            continue;
        }
        let mag = params.social_amplitude * ((state.radius + agent.radius - d) / params.social_range).exp();
        force += away * (mag / d);
    }
    force * weight
}

/// Group-behavior hook; the default contributes nothing.
pub trait GroupForce {
    fn group_force(&self, state: &RobotState, agents: &[SocialAgent], params: &SfmParams) -> Vec2;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoGroupForce;

impl GroupForce for NoGroupForce {
    fn group_force(&self, _: &RobotState, _: &[SocialAgent], _: &SfmParams) -> Vec2 {
        Vec2::ZERO
    }
}

pub fn combine_forces(desired: Vec2, obstacle: Vec2, social: Vec2, group: Vec2) -> ForceBreakdown {
    ForceBreakdown { desired, obstacle, social, group, total: desired + obstacle + social + group }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::LETHAL;
    use crate::geometry::Pose;
    use crate::grid::GridGeometry;
    use proptest::prelude::*;

    fn robot_at(x: f64, y: f64, theta: f64, v: f64) -> RobotState {
        RobotState { pose: Pose::new(x, y, theta), v, omega: 0.0, radius: 0.3 }
    }

    fn params() -> SfmParams {
        SfmParams { desired_speed: 1.0, relaxation_time: 0.5, ..SfmParams::default() }
    }

    #[test]
    fn desired_force_examples() {
        let p = params();
        let rest = robot_at(0.0, 0.0, 0.0, 0.0);
        assert_eq!(compute_desired_force(&rest, Vec2::new(5.0, 0.0), &p), Vec2::new(2.0, 0.0));
        let cruising = robot_at(0.0, 0.0, 0.0, 1.0);
        assert_eq!(compute_desired_force(&cruising, Vec2::new(5.0, 0.0), &p), Vec2::ZERO);
        let p0 = SfmParams { sfm_goal_weight: 0.0, ..p.clone() };
        assert_eq!(compute_desired_force(&rest, Vec2::new(5.0, 0.0), &p0), Vec2::ZERO);
        assert_eq!(compute_desired_force(&rest, Vec2::new(1e-7, 0.0), &p), Vec2::ZERO);
    }

    fn stack() -> CostmapStack {
        CostmapStack::new(GridGeometry::new(0.1, Vec2::ZERO, 100, 100))
    }

    #[test]
    fn obstacle_force_empty_map() {
        let s = stack();
        assert_eq!(compute_obstacle_force(&robot_at(5.05, 5.05, 0.0, 0.0), &s, &params()), Vec2::ZERO);
    }

    #[test]
    fn obstacle_force_single_cell_behind() {
        let mut s = stack();
        let g = *s.geometry();
        s.obstacle_layer_mut()[g.index(40, 50)] = LETHAL;
        s.merge_layers();
        let p = params();
        // robot center exactly 1 m east of that cell's center
        let f = compute_obstacle_force(&robot_at(5.05, 5.05, 0.0, 0.0), &s, &p);
        let expected = p.obstacle_amplitude * ((0.3 - 1.0) / p.obstacle_range).exp();
        assert!(f.y.abs() < 1e-12);
        assert!((f.x - expected).abs() < 1e-12, "{f:?} vs {expected}");
    }

    #[test]
    fn obstacle_force_symmetric_walls_cancel() {
        let mut s = stack();
        let g = *s.geometry();
        for i in 0..100 {
            s.static_layer_mut()[g.index(i, 44)] = LETHAL;
            s.static_layer_mut()[g.index(i, 56)] = LETHAL;
        }
        s.merge_layers();
        let f = compute_obstacle_force(&robot_at(5.05, 5.05, 0.0, 0.0), &s, &params());
        assert!(f.y.abs() < 1e-9, "{f:?}");
        assert!(f.x.abs() < 1e-9, "{f:?}");
    }

    fn target(at: Vec2) -> SocialAgent {
        SocialAgent { id: "doctor".into(), position: at, radius: 0.3, follow_target: true }
    }

    #[test]
    fn band_force_examples() {
        let p = SfmParams { k_rep: 2.0, k_att: 1.0, d_min: 1.0, d_max: 3.0, ..SfmParams::default() };
        let r = robot_at(0.0, 0.0, 0.0, 0.0);
        assert_eq!(compute_social_force(&r, &[target(Vec2::new(2.0, 0.0))], &p), Vec2::ZERO);
        let f = compute_social_force(&r, &[target(Vec2::new(0.5, 0.0))], &p);
        assert!((f.x + 1.0).abs() < 1e-12 && f.y == 0.0);
        let f = compute_social_force(&r, &[target(Vec2::new(4.0, 0.0))], &p);
        assert!((f.x - 1.0).abs() < 1e-12 && f.y == 0.0);
    }

    #[test]
    fn people_weight_zero_silences_agents() {
        let p = SfmParams { sfm_people_weight: 0.0, ..SfmParams::default() };
        let r = robot_at(0.0, 0.0, 0.0, 0.0);
        let agents = vec![
            target(Vec2::new(0.2, 0.0)),
            SocialAgent { id: "x".into(), position: Vec2::new(0.4, 0.1), radius: 0.3, follow_target: false },
        ];
        assert_eq!(compute_social_force(&r, &agents, &p), Vec2::ZERO);
    }

    #[test]
    fn repulsion_points_away() {
        let r = robot_at(0.0, 0.0, 0.0, 0.0);
        let other = SocialAgent { id: "x".into(), position: Vec2::new(0.0, 1.0), radius: 0.3, follow_target: false };
        let f = compute_social_force(&r, &[other], &SfmParams::default());
        assert!(f.y < 0.0 && f.x.abs() < 1e-12);
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine_forces(Vec2::ZERO, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO).total, Vec2::ZERO);
        let b = combine_forces(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::ZERO);
        assert_eq!(b.total, Vec2::new(0.0, 1.0));
        assert_eq!(NoGroupForce.group_force(&robot_at(0.0, 0.0, 0.0, 0.0), &[], &SfmParams::default()), Vec2::ZERO);
    }

    proptest! {
        #[test]
        fn combine_is_exact_sum(v in proptest::collection::vec(-1e3f64..1e3, 8)) {
            let f: Vec<Vec2> = v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
            let b = combine_forces(f[0], f[1], f[2], f[3]);
            let sx: f64 = [f[0].x, f[1].x, f[2].x, f[3].x].iter().sum();
            let sy: f64 = [f[0].y, f[1].y, f[2].y, f[3].y].iter().sum();
            prop_assert!((b.total.x - sx).abs() <= 1e-12 * (1.0 + sx.abs()));
            prop_assert!((b.total.y - sy).abs() <= 1e-12 * (1.0 + sy.abs()));
        }

        #[test]
        fn band_zero_inside_and_continuous(d in 1.0f64..=3.0, eps in 1e-9f64..1e-6) {
            let p = SfmParams::default();
            let robot = Vec2::ZERO;
            prop_assert_eq!(follow_band_force(robot, Vec2::new(d, 0.0), &p), Vec2::ZERO);
            let just_in = follow_band_force(robot, Vec2::new(p.d_min - eps, 0.0), &p).norm();
            let just_out = follow_band_force(robot, Vec2::new(p.d_max + eps, 0.0), &p).norm();
            prop_assert!(just_in <= p.k_rep * eps * 1.0001);
            prop_assert!(just_out <= p.k_att * eps * 1.0001);
        }
    }
}
