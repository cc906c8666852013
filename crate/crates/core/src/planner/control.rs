//! Heading controller turning a force vector into a differential-drive command.

use crate::geometry::{wrap_angle, Vec2};
use crate::planner::SfmParams;
use crate::world::{Command, RobotState};

/// Forces weaker than this count as zero.
pub const ZERO_FORCE_EPS: f64 = 1e-9;

/// Turns toward the force direction and drives forward in proportion to the
/// force's component along the heading. With no force the robot coasts down
/// over one relaxation time and stops turning.
pub fn force_to_cmd(force: Vec2, state: &RobotState, params: &SfmParams, dt: f64) -> Command {
    assert!(dt > 0.0, "dt must be positive");
    let max_v = params.max_lin_vel;
    let max_w = params.max_rot_vel;
    let magnitude = force.norm();
    if magnitude < ZERO_FORCE_EPS {
        let decay = (1.0 - dt / params.relaxation_time).max(0.0);
        return Command::new((state.v.abs() * decay).min(max_v), 0.0);
    }
    let err = wrap_angle(force.angle() - state.pose.theta);
    let omega = (params.k_ang * err).clamp(-max_w, max_w);
    let v = (params.k_lin * magnitude * err.cos().max(0.0)).clamp(0.0, max_v);
    Command::new(v, omega)
}
