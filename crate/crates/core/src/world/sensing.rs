//! Synthetic range sensing and the ground-truth detection oracle.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub beam_count: usize,
    /// Beam angles relative to the robot heading.
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { beam_count: 360, angle_min: -PI, angle_max: PI, max_range: 8.0 }
    }
}

impl LidarConfig {
    /// Angular spacing. A full-circle sweep does not duplicate its end beam.
    pub fn increment(&self) -> f64 {
        let span = self.angle_max - self.angle_min;
        if self.beam_count <= 1 {
            0.0
        } else if (span - TAU).abs() < 1e-9 {
            span / self.beam_count as f64
        } else {
            span / (self.beam_count - 1) as f64
        }
    }

    pub fn beam_angle(&self, k: usize) -> f64 {
        self.angle_min + k as f64 * self.increment()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub beam_count: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
}

impl LidarScan {
    pub fn config(&self) -> LidarConfig {
        LidarConfig {
            beam_count: self.beam_count,
            angle_min: self.angle_min,
            angle_max: self.angle_max,
            max_range: self.max_range,
        }
    }
}

/// Distance along a unit ray to a disc, 0 if the origin is inside it.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let f = origin - center;
    let c = f.dot(f) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = f.dot(dir);
    if b > 0.0 {
        return None;
    }
    let disc = b * b - c;
    (disc >= 0.0).then(|| -b - disc.sqrt())
}

/// Casts every beam against occupied map cells and pedestrian discs.
pub fn sense_lidar(world: &World, pose: &Pose, config: &LidarConfig) -> LidarScan {
    assert!(config.beam_count >= 1, "beam_count must be at least 1");
    let map = &world.scenario().static_map;
    let origin = pose.position();
    let peds: Vec<(Vec2, f64)> = world.pedestrians().map(|(p, at)| (at, p.radius)).collect();
    let ranges = (0..config.beam_count)
        .map(|k| {
            let dir = Vec2::from_angle(pose.theta + config.beam_angle(k));
            let mut best = config.max_range;
            map.geometry.traverse(origin, dir, config.max_range, |i, j, t| {
                if map.is_occupied(i, j) {
                    best = best.min(t);
                    false
                } else {
                    true
                }
            });
            for &(c, r) in &peds {
                if let Some(t) = ray_circle(origin, dir, c, r) {
                    best = best.min(t);
                }
            }
            best.clamp(0.0, config.max_range)
        })
        .collect();
    LidarScan {
        beam_count: config.beam_count,
        angle_min: config.angle_min,
        angle_max: config.angle_max,
        max_range: config.max_range,
        ranges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovConfig {
    /// Full cone angle in `(0, 2π]`.
    pub fov: f64,
    pub range: f64,
}

impl Default for FovConfig {
    fn default() -> Self {
        Self { fov: 2.0 * PI / 3.0, range: 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Pedestrian,
    Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub entity_id: String,
    pub class_label: String,
    pub position: Vec2,
    pub distance: f64,
    pub kind: DetectionKind,
}

fn in_cone(pose: &Pose, fov: &FovConfig, target: Vec2) -> bool {
    let d = target - pose.position();
    let dist = d.norm();
    if dist > fov.range {
        return false;
    }
    if fov.fov >= TAU - 1e-12 || dist < 1e-12 {
        return true;
    }
    wrap_angle(d.angle() - pose.theta).abs() <= fov.fov / 2.0 + 1e-12
}

/// Pedestrians and region anchors inside the view cone with a clear static
/// line of sight, pedestrians first, each group in scenario order.
pub fn detect_entities(world: &World, pose: &Pose, fov: &FovConfig) -> Vec<Detection> {
    assert!(fov.fov > 0.0 && fov.fov <= TAU + 1e-12 && fov.range > 0.0);
    let map = &world.scenario().static_map;
    let here = pose.position();
    let visible = |p: Vec2| in_cone(pose, fov, p) && map.line_of_sight(here, p);
    let mut out = Vec::new();
    for (ped, at) in world.pedestrians() {
        if visible(at) {
            out.push(Detection {
                entity_id: ped.id.clone(),
                class_label: ped.identity.clone(),
                position: at,
                distance: here.distance(at),
                kind: DetectionKind::Pedestrian,
            });
        }
    }
    for region in &world.scenario().regions {
        let at = region.anchor_point();
        if visible(at) {
            out.push(Detection {
                entity_id: region.id.clone(),
                class_label: region.id.clone(),
                position: at,
                distance: here.distance(at),
                kind: DetectionKind::Region,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::test_support::*;
    use std::sync::Arc;

    fn forward_beam() -> LidarConfig {
        LidarConfig { beam_count: 1, angle_min: 0.0, angle_max: 0.0, max_range: 8.0 }
    }

    #[test]
    fn empty_map_reads_max_range() {
        let w = World::new(Arc::new(open_scenario(100, 0.1)));
        let scan = sense_lidar(&w, &w.robot().pose, &LidarConfig::default());
        assert_eq!(scan.ranges.len(), 360);
        assert!(scan.ranges.iter().all(|&r| r == 8.0));
    }

    #[test]
    fn wall_two_meters_ahead() {
        let mut s = open_scenario(100, 0.1);
        let c = s.robot_start.position();
        // wall cells start exactly 2.0 m ahead of the robot center
        s.static_map.fill_rect(c + Vec2::new(2.01, -2.0), c + Vec2::new(2.09, 2.0));
        let w = World::new(Arc::new(s));
        let scan = sense_lidar(&w, &w.robot().pose, &forward_beam());
        assert!((scan.ranges[0] - 2.0).abs() <= 0.05, "{}", scan.ranges[0]);
    }

    #[test]
    fn pedestrian_disc_ahead() {
        let mut s = open_scenario(100, 0.1);
        let c = s.robot_start.position();
        s.pedestrians.push(standing_pedestrian("p", "worker", c + Vec2::new(3.0, 0.0)));
        let w = World::new(Arc::new(s));
        let scan = sense_lidar(&w, &w.robot().pose, &forward_beam());
        assert!((scan.ranges[0] - 2.7).abs() < 1e-12);
    }

    #[test]
    fn ray_circle_cases() {
        let o = Vec2::ZERO;
        let x = Vec2::new(1.0, 0.0);
        assert_eq!(ray_circle(o, x, Vec2::new(-3.0, 0.0), 0.5), None);
        assert_eq!(ray_circle(o, x, Vec2::new(3.0, 2.0), 0.5), None);
        assert_eq!(ray_circle(o, x, Vec2::new(0.1, 0.0), 0.5), Some(0.0));
        // tangent-ish graze
        let t = ray_circle(o, x, Vec2::new(3.0, 0.3), 0.5).unwrap();
        assert!((t - (3.0 - 0.4)).abs() < 1e-12);
    }

    #[test]
    fn ranges_bounded_with_obstacles() {
        let mut s = open_scenario(100, 0.1);
        s.static_map.fill_rect(Vec2::new(6.0, 0.0), Vec2::new(6.5, 10.0));
        s.pedestrians.push(standing_pedestrian("p", "worker", Vec2::new(4.0, 6.0)));
        let w = World::new(Arc::new(s));
        let scan = sense_lidar(&w, &w.robot().pose, &LidarConfig::default());
        assert!(scan.ranges.iter().all(|&r| (0.0..=8.0).contains(&r)));
        assert!(scan.ranges.iter().any(|&r| r < 8.0));
    }

    #[test]
    fn detections_respect_cone_and_occlusion() {
        let mut s = open_scenario(200, 0.1);
        let c = s.robot_start.position();
        s.pedestrians.push(standing_pedestrian("d", "doctor", c + Vec2::new(4.0, 0.0)));
        s.pedestrians.push(standing_pedestrian("b", "patient", c + Vec2::new(-3.0, 0.0)));
        s.pedestrians.push(standing_pedestrian("h", "worker", c + Vec2::new(0.5, 5.0)));
        // wall between robot and `h`
        s.static_map.fill_rect(c + Vec2::new(-1.0, 2.0), c + Vec2::new(2.0, 2.1));
        let w = World::new(Arc::new(s));
        let fov = FovConfig { fov: PI, range: 12.0 };
        let det = detect_entities(&w, &w.robot().pose, &fov);
        assert_eq!(det.len(), 1);
        assert_eq!(det[0].class_label, "doctor");
        assert!((det[0].distance - 4.0).abs() < 1e-12);

        let all_around = FovConfig { fov: TAU, range: 12.0 };
        let det = detect_entities(&w, &w.robot().pose, &all_around);
        let ids: Vec<_> = det.iter().map(|d| d.entity_id.as_str()).collect();
        assert_eq!(ids, vec!["d", "b"]);
    }
}
