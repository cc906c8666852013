//! Fast-loop local planner: social forces, heading controller and global path.

pub mod control;
pub mod forces;
pub mod params;
pub mod path;

pub use control::force_to_cmd;
pub use forces::{
    combine_forces, compute_desired_force, compute_obstacle_force, compute_social_force, follow_band_force,
    ForceBreakdown, GroupForce, NoGroupForce, SocialAgent,
};
pub use params::{canonical_key, ParamUpdates, SfmParams};
pub use path::{plan_global_path, plan_grid_path};
