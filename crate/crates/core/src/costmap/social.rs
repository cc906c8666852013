//! Social layer: cost fields around entities marked by the slow loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::world::region::point_in_polygon;

use super::LETHAL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowBand {
    pub d_min: f64,
    pub d_max: f64,
}

/// Cost attributes attached to one marked entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialEntityAttr {
    pub entity_id: String,
    pub class_label: String,
    /// Base cost in `[0, 254]`.
    pub cost_value: f64,
    /// Influence radius in meters (for band entities: extent beyond `d_max`).
    pub inflation_radius: f64,
    /// Exponential decay rate in 1/m.
    pub decay_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<FollowBand>,
    /// World position; unanchored markers are resolved by entity id before use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec2>,
    /// Region mask; when present, `d` is the distance to the polygon (0 inside).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<Vec<Vec2>>,
}

impl SocialEntityAttr {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("marker `{}`: {m}", self.entity_id)));
        if !self.cost_value.is_finite() || self.cost_value < 0.0 {
            return bad("cost_value must be a finite value ≥ 0");
        }
        if self.cost_value > LETHAL as f64 {
            return bad("cost_value exceeds 254");
        }
        if !(self.inflation_radius > 0.0) || !self.inflation_radius.is_finite() {
            return bad("inflation_radius must be > 0");
        }
        if !(self.decay_rate >= 0.0) || !self.decay_rate.is_finite() {
            return bad("decay_rate must be ≥ 0");
        }
        if let Some(b) = self.band {
            if !(b.d_min > 0.0 && b.d_min < b.d_max && b.d_max.is_finite()) {
                return bad("band needs 0 < d_min < d_max");
            }
        }
        if self.position.is_some_and(|p| !p.is_finite()) {
            return bad("position must be finite");
        }
        if let Some(poly) = &self.footprint {
            if poly.len() < 3 || poly.iter().any(|p| !p.is_finite()) {
                return bad("footprint needs at least 3 finite vertices");
            }
        }
        Ok(())
    }

    pub fn is_anchored(&self) -> bool {
        self.position.is_some() || self.footprint.is_some()
    }

    /// Distance from `p` to the entity: footprint first, else position.
    pub fn distance_from(&self, p: Vec2) -> Option<f64> {
        if let Some(poly) = &self.footprint {
            return Some(distance_to_polygon(poly, p));
        }
        self.position.map(|at| at.distance(p))
    }

    /// Axis-aligned box `(min, max)` outside which the entity contributes 0.
    pub fn bounds(&self) -> Option<(Vec2, Vec2)> {
        let r = self.extent();
        let grow = Vec2::new(r, r);
        if let Some(poly) = &self.footprint {
            let mut lo = poly[0];
            let mut hi = poly[0];
            for v in poly {
                lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
            }
            return Some((lo - grow, hi + grow));
        }
        self.position.map(|at| (at - grow, at + grow))
    }

    /// Farthest distance at which this entity contributes.
    pub fn extent(&self) -> f64 {
        match self.band {
            Some(b) => b.d_max + self.inflation_radius,
            None => self.inflation_radius,
        }
    }

    /// Real-valued cost at distance `d` from the entity.
    ///
    /// Plain entities: `C·e^(−λd)` for `d ≤ R`, 0 beyond. Band entities:
    /// lethal inside `d_min`, `C` across the band, `C·e^(−λ(d − d_max))` for
    /// `d_max < d ≤ d_max + R`, 0 beyond.
    pub fn cost_at_distance(&self, d: f64) -> f64 {
        let c = self.cost_value;
        match self.band {
            None => {
                if d <= self.inflation_radius {
                    c * (-self.decay_rate * d).exp()
                } else {
                    0.0
                }
            }
            Some(b) => {
                if d < b.d_min {
                    LETHAL as f64
                } else if d <= b.d_max {
                    c
                } else if d <= b.d_max + self.inflation_radius {
                    c * (-self.decay_rate * (d - b.d_max)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Euclidean distance from `p` to a polygon, 0 when `p` is inside or on it.
pub fn distance_to_polygon(poly: &[Vec2], p: Vec2) -> f64 {
    if point_in_polygon(poly, p) {
        return 0.0;
    }
    let n = poly.len();
    (0..n).map(|k| distance_to_segment(p, poly[k], poly[(k + 1) % n])).fold(f64::INFINITY, f64::min)
}

fn distance_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t).distance(p)
}
