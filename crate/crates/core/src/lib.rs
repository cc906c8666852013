//! Fast/slow social navigation: a deterministic 2D world, a layered social
//! costmap, a social-force local planner driven by slow-loop directives, and
//! the benchmark metrics and harness around them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmap;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod hash;
pub mod metrics;
pub mod modulator;
pub mod planner;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{wrap_angle, Pose, Vec2};
