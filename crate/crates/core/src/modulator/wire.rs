//! JSON wire format shared with external reasoning services.
//!
//! Request:
//! `{instruction, robot: {x, y, theta, v, omega}, detections: [{id, class_label, x, y, distance}], sim_time, task_goal?}`
//!
//! Response:
//! `{mode, param_updates: {key: number}, markers: [{entity_id, class_label, cost_value, inflation_radius, decay_rate, d_min?, d_max?, x?, y?}], goal?: {x, y} | {region_id}}`

use serde_json::{json, Map, Value};

use super::{DecisionInput, Directive, GoalSpec, Mode};
use crate::costmap::{FollowBand, SocialEntityAttr};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::planner::{canonical_key, ParamUpdates, SfmParams};

fn goal_value(goal: &GoalSpec) -> Value {
    match goal {
        GoalSpec::Point { x, y } => json!({ "x": x, "y": y }),
        GoalSpec::Region { region_id } => json!({ "region_id": region_id }),
    }
}

pub fn encode_request(input: &DecisionInput<'_>) -> Value {
    let r = input.robot;
    let detections: Vec<Value> = input
        .detections
        .iter()
        .map(|d| {
            json!({
                "id": d.entity_id,
                "class_label": d.class_label,
                "x": d.position.x,
                "y": d.position.y,
                "distance": d.distance,
            })
        })
        .collect();
    let mut doc = json!({
        "instruction": input.instruction,
        "robot": { "x": r.pose.x, "y": r.pose.y, "theta": r.pose.theta, "v": r.v, "omega": r.omega },
        "detections": detections,
        "sim_time": input.sim_time,
    });
    if let Some(goal) = input.task_goal {
        doc["task_goal"] = goal_value(goal);
    }
    doc
}

/// Response document for `directive`; `issued_at` is not part of the wire format.
pub fn encode_response(directive: &Directive) -> Value {
    let markers: Vec<Value> = directive
        .markers
        .iter()
        .map(|m| {
            let mut o = json!({
                "entity_id": m.entity_id,
                "class_label": m.class_label,
                "cost_value": m.cost_value,
                "inflation_radius": m.inflation_radius,
                "decay_rate": m.decay_rate,
            });
            if let Some(b) = m.band {
                o["d_min"] = json!(b.d_min);
                o["d_max"] = json!(b.d_max);
            }
            if let Some(p) = m.position {
                o["x"] = json!(p.x);
                o["y"] = json!(p.y);
            }
            o
        })
        .collect();
    let mut doc = json!({
        "mode": directive.mode.as_str(),
        "param_updates": directive.param_updates,
        "markers": markers,
    });
    if let Some(goal) = &directive.goal {
        doc["goal"] = goal_value(goal);
    }
    doc
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn reject_unknown(o: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    match o.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(join(path, k), "unknown field")),
        None => Ok(()),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn number(o: &Map<String, Value>, path: &str, key: &str) -> Result<Option<f64>> {
    match o.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| schema(join(path, key), "expected a finite number")),
    }
}

fn required_number(o: &Map<String, Value>, path: &str, key: &str) -> Result<f64> {
    number(o, path, key)?.ok_or_else(|| schema(join(path, key), "missing"))
}

fn string(o: &Map<String, Value>, path: &str, key: &str) -> Result<String> {
    match o.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(schema(join(path, key), "expected a string")),
        None => Err(schema(join(path, key), "missing")),
    }
}

fn decode_goal(v: &Value, path: &str) -> Result<GoalSpec> {
    let o = object(v, path)?;
    if o.contains_key("region_id") {
        reject_unknown(o, path, &["region_id"])?;
        return Ok(GoalSpec::Region { region_id: string(o, path, "region_id")? });
    }
    reject_unknown(o, path, &["x", "y"])?;
    Ok(GoalSpec::Point { x: required_number(o, path, "x")?, y: required_number(o, path, "y")? })
}

fn decode_marker(v: &Value, path: &str) -> Result<SocialEntityAttr> {
    let o = object(v, path)?;
    reject_unknown(
        o,
        path,
        &["entity_id", "class_label", "cost_value", "inflation_radius", "decay_rate", "d_min", "d_max", "x", "y"],
    )?;
    let band = match (number(o, path, "d_min")?, number(o, path, "d_max")?) {
        (Some(d_min), Some(d_max)) => Some(FollowBand { d_min, d_max }),
        (None, None) => None,
        (Some(_), None) => return Err(schema(join(path, "d_max"), "required with d_min")),
        (None, Some(_)) => return Err(schema(join(path, "d_min"), "required with d_max")),
    };
    let position = match (number(o, path, "x")?, number(o, path, "y")?) {
        (Some(x), Some(y)) => Some(Vec2::new(x, y)),
        (None, None) => None,
        _ => return Err(schema(path, "x and y go together")),
    };
    let marker = SocialEntityAttr {
        entity_id: string(o, path, "entity_id")?,
        class_label: string(o, path, "class_label")?,
        cost_value: required_number(o, path, "cost_value")?,
        inflation_radius: required_number(o, path, "inflation_radius")?,
        decay_rate: required_number(o, path, "decay_rate")?,
        band,
        position,
        footprint: None,
    };
    marker.validate().map_err(|e| schema(path, e.to_string()))?;
    Ok(marker)
}

/// Parses and validates a response; `issued_at` is left at 0 for the caller.
pub fn decode_response(doc: &Value) -> Result<Directive> {
    let o = object(doc, "")?;
    reject_unknown(o, "", &["mode", "param_updates", "markers", "goal"])?;
    let mode_text = string(o, "", "mode")?;
    let mode = Mode::parse(&mode_text).ok_or_else(|| schema("mode", format!("unknown mode `{mode_text}`")))?;

    let mut param_updates = ParamUpdates::new();
    if let Some(v) = o.get("param_updates") {
        for (key, value) in object(v, "param_updates")? {
            let path = join("param_updates", key);
            let canonical = canonical_key(key).ok_or_else(|| schema(&path, format!("unknown parameter `{key}`")))?;
            let x =
                value.as_f64().filter(|x| x.is_finite()).ok_or_else(|| schema(&path, "expected a finite number"))?;
            param_updates.insert(canonical.to_string(), x);
        }
    }
    SfmParams::default().apply_param_update(&param_updates).map_err(|e| schema("param_updates", e.to_string()))?;

    let mut markers = Vec::new();
    if let Some(v) = o.get("markers") {
        let items = v.as_array().ok_or_else(|| schema("markers", "expected an array"))?;
        for (k, item) in items.iter().enumerate() {
            markers.push(decode_marker(item, &format!("markers[{k}]"))?);
        }
    }
    let goal = match o.get("goal") {
        None | Some(Value::Null) => None,
        Some(v) => Some(decode_goal(v, "goal")?),
    };
    Ok(Directive { mode, param_updates, markers, goal, issued_at: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::world::{Detection, DetectionKind, RobotState};

    fn sample() -> Directive {
        let mut d = Directive::new(Mode::Follow);
        d.param_updates.insert("sfm_people_weight".into(), 2.0);
        d.param_updates.insert("sfm_goal_weight".into(), 0.5);
        d.markers.push(SocialEntityAttr {
            entity_id: "doc".into(),
            class_label: "doctor".into(),
            cost_value: 120.0,
            inflation_radius: 2.0,
            decay_rate: 0.5,
            band: Some(FollowBand { d_min: 1.0, d_max: 3.0 }),
            position: Some(Vec2::new(4.0, 1.5)),
            footprint: None,
        });
        d
    }

    #[test]
    fn round_trip_identity() {
        let d = sample();
        assert_eq!(decode_response(&encode_response(&d)).unwrap(), d);
        let mut g = Directive::new(Mode::Goal);
        g.goal = Some(GoalSpec::Region { region_id: "desk".into() });
        assert_eq!(decode_response(&encode_response(&g)).unwrap(), g);
        g.goal = Some(GoalSpec::Point { x: 1.0, y: -2.0 });
        assert_eq!(decode_response(&encode_response(&g)).unwrap(), g);
    }

    #[test]
    fn unknown_param_is_named() {
        let doc = json!({ "mode": "goal", "param_updates": { "turbo": 3.0 } });
        let err = decode_response(&doc).unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path == "param_updates.turbo"), "{err}");
        assert!(err.to_string().contains("turbo"));
    }

    #[test]
    fn camel_case_aliases_are_accepted() {
        let doc = json!({ "mode": "goal", "param_updates": { "forceFactorDesired": 2.0 } });
        let d = decode_response(&doc).unwrap();
        assert_eq!(d.param_updates["force_factor_desired"], 2.0);
    }

    #[test]
    fn optional_goal_absent() {
        let doc = json!({ "mode": "idle", "param_updates": {}, "markers": [] });
        let d = decode_response(&doc).unwrap();
        assert_eq!(d.goal, None);
        assert_eq!(d.mode, Mode::Idle);
    }

    #[test]
    fn malformed_responses_carry_field_paths() {
        let cases = [
            (json!({ "param_updates": {} }), "mode"),
            (json!({ "mode": "dance" }), "mode"),
            (
                json!({ "mode": "goal", "markers": [{ "entity_id": "a", "class_label": "b", "cost_value": 999.0, "inflation_radius": 1.0, "decay_rate": 0.0 }] }),
                "markers[0]",
            ),
            (
                json!({ "mode": "goal", "markers": [{ "entity_id": "a", "class_label": "b", "cost_value": "x", "inflation_radius": 1.0, "decay_rate": 0.0 }] }),
                "markers[0].cost_value",
            ),
            (json!({ "mode": "goal", "goal": { "x": 1.0 } }), "goal.y"),
            (json!({ "mode": "goal", "extra": 1 }), "extra"),
            (json!({ "mode": "goal", "param_updates": { "d_min": 9.0 } }), "param_updates"),
        ];
        for (doc, want) in cases {
            match decode_response(&doc) {
                Err(Error::Schema { path, .. }) => assert_eq!(path, want, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }

    #[test]
    fn request_shape() {
        let robot = RobotState { pose: Pose::new(1.0, 2.0, 0.5), v: 0.3, omega: 0.1, radius: 0.3 };
        let dets = [Detection {
            entity_id: "doc".into(),
            class_label: "doctor".into(),
            position: Vec2::new(4.0, 2.0),
            distance: 3.0,
            kind: DetectionKind::Pedestrian,
        }];
        let input = DecisionInput {
            instruction: "Follow the doctor",
            detections: &dets,
            robot: &robot,
            sim_time: 10.0,
            history: &[],
            task_goal: None,
        };
        let doc = encode_request(&input);
        assert_eq!(doc["robot"]["theta"], 0.5);
        assert_eq!(doc["detections"][0]["id"], "doc");
        assert_eq!(doc["detections"][0]["distance"], 3.0);
        assert_eq!(doc["sim_time"], 10.0);
        assert!(doc.get("task_goal").is_none());
    }
}
