//! Semantic regions and point containment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Goal,
    Forbidden,
    Caution,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub kind: RegionKind,
    pub polygon: Vec<Vec2>,
    #[serde(default)]
    pub severity_weight: f64,
    /// Point reported by the detection oracle; defaults to the vertex centroid.
    #[serde(default)]
    pub anchor: Option<Vec2>,
}

const EDGE_EPS: f64 = 1e-9;

impl Region {
    pub fn validate(&self) -> Result<()> {
        if self.polygon.len() < 3 {
            return Err(Error::Validation(format!(
                "region `{}` has {} vertices, need at least 3",
                self.id,
                self.polygon.len()
            )));
        }
        if !(self.severity_weight >= 0.0) {
            return Err(Error::Validation(format!("region `{}` has negative severity weight", self.id)));
        }
        if self.polygon.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation(format!("region `{}` has a non-finite vertex", self.id)));
        }
        if !is_simple(&self.polygon) {
            return Err(Error::Validation(format!("region `{}` polygon self-intersects", self.id)));
        }
        Ok(())
    }

    pub fn anchor_point(&self) -> Vec2 {
        self.anchor.unwrap_or_else(|| {
            let n = self.polygon.len() as f64;
            let sum = self.polygon.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
            sum * (1.0 / n)
        })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_region(self, p)
    }

    /// Display label: the id with underscores read as spaces.
    pub fn label(&self) -> String {
        self.id.replace('_', " ")
    }
}

/// Even-odd containment where points on an edge or vertex count as inside.
pub fn point_in_region(region: &Region, p: Vec2) -> bool {
    point_in_polygon(&region.polygon, p)
}

pub fn point_in_polygon(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    for k in 0..n {
        if on_segment(poly[k], poly[(k + 1) % n], p) {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a.distance(p) <= EDGE_EPS;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab * t).distance(p) <= EDGE_EPS
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(p1, p2, q1) || on_segment(p1, p2, q2) || on_segment(q1, q2, p1) || on_segment(q1, q2, p2)
}

/// No two non-adjacent edges touch and no edge is degenerate.
pub fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if poly[i].distance(poly[(i + 1) % n]) <= EDGE_EPS {
            return false;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(points: &[[f64; 2]]) -> Region {
        Region {
            id: "r".into(),
            kind: RegionKind::Forbidden,
            polygon: points.iter().map(|p| Vec2::from(*p)).collect(),
            severity_weight: 1.0,
            anchor: None,
        }
    }

    fn unit_square() -> Region {
        region(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    }

    fn l_shape() -> Region {
        // 2×2 square with the top-right unit square removed
        region(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
    }

    #[test]
    fn unit_square_cases() {
        let sq = unit_square();
        assert!(point_in_region(&sq, Vec2::new(0.5, 0.5)));
        assert!(!point_in_region(&sq, Vec2::new(2.0, 2.0)));
        assert!(point_in_region(&sq, Vec2::new(1.0, 0.5)));
        assert!(point_in_region(&sq, Vec2::new(0.0, 0.0)));
    }

    /// Rasterization oracle: a fine-grid point is inside the L exactly when it
    /// falls in one of the three unit squares composing it.
    fn l_oracle(p: Vec2) -> bool {
        let in_box = |x0: f64, y0: f64| p.x >= x0 && p.x <= x0 + 1.0 && p.y >= y0 && p.y <= y0 + 1.0;
        in_box(0.0, 0.0) || in_box(1.0, 0.0) || in_box(0.0, 1.0)
    }

    #[test]
    fn concave_notch_matches_raster_oracle() {
        let l = l_shape();
        assert!(!point_in_region(&l, Vec2::new(1.5, 1.5)));
        let n = 97;
        for a in 0..n {
            for b in 0..n {
                let p = Vec2::new(-0.25 + 2.5 * a as f64 / (n - 1) as f64, -0.25 + 2.5 * b as f64 / (n - 1) as f64);
                assert_eq!(point_in_region(&l, p), l_oracle(p), "mismatch at {p:?}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_polygons() {
        assert!(region(&[[0.0, 0.0], [1.0, 0.0]]).validate().is_err());
        let bowtie = region(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(bowtie.validate().is_err());
        assert!(l_shape().validate().is_ok());
    }

    #[test]
    fn centroid_anchor() {
        assert_eq!(unit_square().anchor_point(), Vec2::new(0.5, 0.5));
    }
}
