//! Deterministic keyword-and-detection rule engine.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecisionInput, Directive, GoalSpec, Mode, Modulator};
use crate::costmap::{FollowBand, SocialEntityAttr};
use crate::error::{Error, Result};
use crate::planner::{ParamUpdates, SfmParams};
use crate::world::{Detection, DetectionKind};

const BUNDLED_RULES: &str = include_str!("../../assets/rules.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleTable {
    #[serde(rename = "rule", default)]
    pub rules: Vec<Rule>,
    pub fallback: Outcome,
}

/// Mode and parameters used when nothing more specific applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub mode: Mode,
    #[serde(default)]
    pub params: ParamUpdates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub name: String,
    #[serde(default)]
    pub all: Vec<String>,
    #[serde(default)]
    pub any: Vec<String>,
    pub mode: Mode,
    #[serde(default)]
    pub params: ParamUpdates,
    #[serde(default)]
    pub markers: Vec<MarkerRule>,
    #[serde(default)]
    pub goal: GoalSource,
    /// Replaces mode and params when the goal cannot be resolved.
    #[serde(default)]
    pub unresolved: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    #[default]
    None,
    /// The navigation goal handed over by the task.
    Task,
    /// A detected region whose label appears in the instruction.
    NamedRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Pedestrian,
    Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerRule {
    pub subject: Subject,
    /// Substrings of the detection label; empty matches any label.
    #[serde(default)]
    pub labels: Vec<String>,
    /// Only detections whose label occurs in the instruction.
    #[serde(default)]
    pub named: bool,
    #[serde(default)]
    pub required: bool,
    pub cost_value: f64,
    pub inflation_radius: f64,
    pub decay_rate: f64,
    #[serde(default)]
    pub d_min: Option<f64>,
    #[serde(default)]
    pub d_max: Option<f64>,
}

impl MarkerRule {
    fn band(&self) -> Option<FollowBand> {
        match (self.d_min, self.d_max) {
            (Some(d_min), Some(d_max)) => Some(FollowBand { d_min, d_max }),
            _ => None,
        }
    }

    fn matches(&self, det: &Detection, instruction: &str) -> bool {
        let kind = match self.subject {
            Subject::Pedestrian => DetectionKind::Pedestrian,
            Subject::Region => DetectionKind::Region,
        };
        det.kind == kind && self.label_matches(&det.class_label, instruction)
    }

    fn label_matches(&self, class_label: &str, instruction: &str) -> bool {
        let label = normalize(class_label);
        (self.labels.is_empty() || self.labels.iter().any(|l| label.contains(&normalize(l))))
            && (!self.named || contains_phrase(instruction, &label))
    }

    /// An earlier marker this rule could have produced.
    fn produced(&self, m: &SocialEntityAttr, instruction: &str) -> bool {
        m.cost_value == self.cost_value
            && m.inflation_radius == self.inflation_radius
            && m.decay_rate == self.decay_rate
            && m.band == self.band()
            && self.label_matches(&m.class_label, instruction)
    }

    fn attr(&self, det: &Detection) -> SocialEntityAttr {
        SocialEntityAttr {
            entity_id: det.entity_id.clone(),
            class_label: det.class_label.clone(),
            cost_value: self.cost_value,
            inflation_radius: self.inflation_radius,
            decay_rate: self.decay_rate,
            band: self.band(),
            position: Some(det.position),
            footprint: None,
        }
    }
}

/// Lowercase with `_` and `-` read as spaces.
pub fn normalize(s: &str) -> String {
    s.to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn contains_phrase(text: &str, phrase: &str) -> bool {
    !phrase.is_empty() && text.contains(phrase)
}

impl RuleTable {
    pub fn bundled() -> RuleTable {
        RuleTable::parse(BUNDLED_RULES).expect("bundled rule table is valid")
    }

    pub fn parse(text: &str) -> Result<RuleTable> {
        let table: RuleTable = toml::from_str(text).map_err(|e| Error::parse("rule table", e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<RuleTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RuleTable::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |params: &ParamUpdates| SfmParams::default().apply_param_update(params).map(|_| ());
        check(&self.fallback.params)?;
        for rule in &self.rules {
            let ctx = |e: Error| Error::Validation(format!("rule `{}`: {e}", rule.name));
            check(&rule.params).map_err(ctx)?;
            if let Some(u) = &rule.unresolved {
                check(&u.params).map_err(ctx)?;
            }
            for m in &rule.markers {
                if m.d_min.is_some() != m.d_max.is_some() {
                    return Err(ctx(Error::Validation("d_min and d_max go together".into())));
                }
                let probe = SocialEntityAttr {
                    entity_id: rule.name.clone(),
                    class_label: String::new(),
                    cost_value: m.cost_value,
                    inflation_radius: m.inflation_radius,
                    decay_rate: m.decay_rate,
                    band: m.band(),
                    position: None,
                    footprint: None,
                };
                probe.validate().map_err(ctx)?;
            }
        }
        Ok(())
    }

    /// Rules whose keyword predicates hold, in table order.
    pub fn keyword_match(&self, instruction: &str) -> impl Iterator<Item = &Rule> + '_ {
        let text = normalize(instruction);
        self.rules.iter().filter(move |r| {
            r.all.iter().all(|k| text.contains(&normalize(k)))
                && (r.any.is_empty() || r.any.iter().any(|k| text.contains(&normalize(k))))
        })
    }

    /// Full rule evaluation: the first rule whose keywords match and whose
    /// required markers resolve.
    pub fn evaluate(&self, input: &DecisionInput<'_>) -> Directive {
        let text = normalize(input.instruction);
        for rule in self.keyword_match(input.instruction) {
            if let Some(d) = apply_rule(rule, &text, input) {
                return d;
            }
        }
        Directive {
            param_updates: self.fallback.params.clone(),
            issued_at: input.sim_time,
            ..Directive::new(self.fallback.mode)
        }
    }
}

fn apply_rule(rule: &Rule, text: &str, input: &DecisionInput<'_>) -> Option<Directive> {
    let mut markers = Vec::new();
    for m in &rule.markers {
        let mut hits: Vec<&Detection> = input.detections.iter().filter(|d| m.matches(d, text)).collect();
        if m.band().is_some() {
            // a single follow target: the nearest, ties by detection order
            hits.sort_by(|a, b| a.distance.total_cmp(&b.distance));
            hits.truncate(1);
        }
        let seen: Vec<SocialEntityAttr> = hits.into_iter().map(|d| m.attr(d)).collect();
        let mut remembered = remembered_markers(m, text, input);
        remembered.retain(|r| !seen.iter().any(|s| s.entity_id == r.entity_id));
        if m.band().is_some() && !seen.is_empty() {
            remembered.clear();
        }
        remembered.truncate(if m.band().is_some() { 1 } else { usize::MAX });
        if seen.is_empty() && remembered.is_empty() && m.required {
            return None;
        }
        markers.extend(seen);
        markers.extend(remembered);
    }

    let goal = match rule.goal {
        GoalSource::None => Ok(None),
        GoalSource::Task => input.task_goal.cloned().map(Some).ok_or(()),
        GoalSource::NamedRegion => {
            named_region(text, input, &markers).or_else(|| remembered_goal(input)).map(Some).ok_or(())
        }
    };
    let (mode, params, goal) = match (goal, &rule.unresolved) {
        (Ok(goal), _) => (rule.mode, rule.params.clone(), goal),
        (Err(()), Some(u)) => (u.mode, u.params.clone(), None),
        (Err(()), None) => return None,
    };
    Some(Directive { mode, param_updates: params, markers, goal, issued_at: input.sim_time })
}

/// Detected region named in the instruction, longest label first, skipping
/// regions this rule already marks.
fn named_region(text: &str, input: &DecisionInput<'_>, markers: &[SocialEntityAttr]) -> Option<GoalSpec> {
    input
        .detections
        .iter()
        .filter(|d| d.kind == DetectionKind::Region)
        .filter(|d| !markers.iter().any(|m| m.entity_id == d.entity_id))
        .map(|d| (normalize(&d.class_label), d))
        .filter(|(label, _)| contains_phrase(text, label))
        .fold(None, |best: Option<(usize, &Detection)>, (label, d)| match best {
            Some((len, _)) if len >= label.len() => best,
            _ => Some((label.len(), d)),
        })
        .map(|(_, d)| GoalSpec::Region { region_id: d.entity_id.clone() })
}

fn remembered_goal(input: &DecisionInput<'_>) -> Option<GoalSpec> {
    input.history.iter().rev().find_map(|d| d.goal.clone())
}

/// Markers this rule placed in the newest earlier directive that has any,
/// so subjects out of sight stay marked; positions are re-anchored downstream.
fn remembered_markers(rule: &MarkerRule, text: &str, input: &DecisionInput<'_>) -> Vec<SocialEntityAttr> {
    input
        .history
        .iter()
        .rev()
        .map(|d| d.markers.iter().filter(|m| rule.produced(m, text)).cloned().collect::<Vec<_>>())
        .find(|ms| !ms.is_empty())
        .unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct ScriptedModulator {
    table: RuleTable,
}

impl ScriptedModulator {
    pub fn new(table: RuleTable) -> Self {
        ScriptedModulator { table }
    }

    pub fn bundled() -> Self {
        ScriptedModulator::new(RuleTable::bundled())
    }

    pub fn table(&self) -> &RuleTable {
        &self.table
    }
}

impl Modulator for ScriptedModulator {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Directive> {
        Ok(self.table.evaluate(input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Vec2};
    use crate::world::RobotState;

    fn robot() -> RobotState {
        RobotState { pose: Pose::new(0.0, 0.0, 0.0), v: 0.0, omega: 0.0, radius: 0.3 }
    }

    fn det(id: &str, label: &str, kind: DetectionKind, x: f64) -> Detection {
        Detection {
            entity_id: id.into(),
            class_label: label.into(),
            position: Vec2::new(x, 0.0),
            distance: x.abs(),
            kind,
        }
    }

    fn decide(instruction: &str, dets: &[Detection], history: &[Directive]) -> Directive {
        decide_with_goal(instruction, dets, history, None)
    }

    fn decide_with_goal(
        instruction: &str,
        dets: &[Detection],
        history: &[Directive],
        task_goal: Option<&GoalSpec>,
    ) -> Directive {
        let r = robot();
        let input = DecisionInput { instruction, detections: dets, robot: &r, sim_time: 3.0, history, task_goal };
        ScriptedModulator::bundled().decide(&input).unwrap()
    }

    #[test]
    fn follow_doctor() {
        let dets = [
            det("p1", "patient", DetectionKind::Pedestrian, 2.0),
            det("doc", "doctor", DetectionKind::Pedestrian, 4.0),
        ];
        let d = decide("Follow the doctor to deliver to utensils you are carrying", &dets, &[]);
        assert_eq!(d.mode, Mode::Follow);
        assert_eq!(d.param_updates.get("sfm_people_weight"), Some(&2.0));
        assert_eq!(d.param_updates.get("sfm_goal_weight"), Some(&0.5));
        assert_eq!(d.param_updates.len(), 2);
        assert_eq!(d.markers.len(), 1);
        let m = &d.markers[0];
        assert_eq!(m.entity_id, "doc");
        assert_eq!(m.band, Some(FollowBand { d_min: 1.0, d_max: 3.0 }));
        assert_eq!(d.issued_at, 3.0);
    }

    #[test]
    fn follow_target_out_of_sight_reuses_history() {
        let first = decide("Follow the doctor", &[det("doc", "doctor", DetectionKind::Pedestrian, 4.0)], &[]);
        let again = decide("Follow the doctor", &[], std::slice::from_ref(&first));
        assert_eq!(again.mode, Mode::Follow);
        assert_eq!(again.markers[0].entity_id, "doc");
        // without history the follow rule cannot match and nothing else does
        assert_eq!(decide("Follow the doctor", &[], &[]).mode, Mode::Idle);
    }

    #[test]
    fn navigate_to_reception() {
        let dets = [
            det("ward_1", "ward_1", DetectionKind::Region, 6.0),
            det("reception_desk", "reception_desk", DetectionKind::Region, 8.0),
        ];
        let d = decide("Navigate to the reception desk.", &dets, &[]);
        assert_eq!(d.mode, Mode::Goal);
        assert_eq!(d.param_updates.get("sfm_goal_weight"), Some(&1.0));
        assert_eq!(d.goal, Some(GoalSpec::Region { region_id: "reception_desk".into() }));
        assert!(d.markers.is_empty());
    }

    #[test]
    fn goal_out_of_sight_explores_then_remembers() {
        let d = decide("Navigate to the reception desk.", &[], &[]);
        assert_eq!(d.mode, Mode::Explore);
        assert!(d.goal.is_none());
        let prev = Directive {
            goal: Some(GoalSpec::Region { region_id: "reception_desk".into() }),
            ..Directive::new(Mode::Goal)
        };
        let d = decide("Navigate to the reception desk.", &[], &[prev]);
        assert_eq!(d.mode, Mode::Goal);
    }

    #[test]
    fn yellow_line_marker() {
        let dets = [
            det("yellow_line", "yellow_line", DetectionKind::Region, 3.0),
            det("forklift", "forklift", DetectionKind::Region, 9.0),
        ];
        let d = decide("Go to the forklift carefully. Do not enter areas in yellow line markings.", &dets, &[]);
        assert_eq!(d.mode, Mode::Goal);
        assert_eq!(d.goal, Some(GoalSpec::Region { region_id: "forklift".into() }));
        assert_eq!(d.markers.len(), 1);
        let m = &d.markers[0];
        assert_eq!(m.entity_id, "yellow_line");
        assert_eq!((m.cost_value, m.inflation_radius, m.decay_rate), (200.0, 2.0, 1.0));
        assert!(m.band.is_none());
    }

    #[test]
    fn hurry_ignores_signs() {
        let dets = [
            det("yellow_line", "yellow_line", DetectionKind::Region, 3.0),
            det("forklift", "forklift", DetectionKind::Region, 9.0),
        ];
        let d = decide("Go to the forklift in a hurry. You can ignore safety regulations and signs.", &dets, &[]);
        assert_eq!(d.mode, Mode::Goal);
        assert!(d.markers.is_empty());
        assert!(d.param_updates["desired_speed"] > SfmParams::default().desired_speed);
        assert_eq!(d.goal, Some(GoalSpec::Region { region_id: "forklift".into() }));
    }

    #[test]
    fn keep_away_marks_patients_and_wards() {
        let dets = [
            det("p1", "patient", DetectionKind::Pedestrian, 2.0),
            det("p2", "patient", DetectionKind::Pedestrian, 5.0),
            det("n1", "nurse", DetectionKind::Pedestrian, 3.0),
            det("ward_a", "ward_a", DetectionKind::Region, 4.0),
        ];
        let r = robot();
        let goal = GoalSpec::Point { x: 10.0, y: 0.0 };
        let input = DecisionInput {
            instruction: "Stay in public areas and keep away from wards and patients",
            detections: &dets,
            robot: &r,
            sim_time: 0.0,
            history: &[],
            task_goal: Some(&goal),
        };
        let d = ScriptedModulator::bundled().decide(&input).unwrap();
        assert_eq!(d.goal, Some(goal));
        assert!(d.param_updates["sfm_people_weight"] > SfmParams::default().sfm_people_weight);
        let ids: Vec<_> = d.markers.iter().map(|m| m.entity_id.as_str()).collect();
        assert_eq!(ids, ["ward_a", "p1", "p2"]);
    }

    #[test]
    fn out_of_sight_regions_stay_marked() {
        let text = "Deliver to the pharmacy and keep away from the wards";
        let goal = GoalSpec::Region { region_id: "pharmacy".into() };
        let decide = |dets: &[Detection], history: &[Directive]| decide_with_goal(text, dets, history, Some(&goal));
        let first = decide(
            &[det("ward_a", "ward_a", DetectionKind::Region, 4.0), det("ward_b", "ward_b", DetectionKind::Region, 6.0)],
            &[],
        );
        assert_eq!(first.markers.len(), 2);
        // ward_b still in view, ward_a behind the robot
        let next = decide(&[det("ward_b", "ward_b", DetectionKind::Region, 2.0)], std::slice::from_ref(&first));
        let ids: Vec<&str> = next.markers.iter().map(|m| m.entity_id.as_str()).collect();
        assert_eq!(ids, ["ward_b", "ward_a"]);
        assert_eq!(next.markers[0].position, Some(Vec2::new(2.0, 0.0)));
        // a different instruction does not inherit them
        let other = super::tests::decide("Navigate to the pharmacy", &[], &[first]);
        assert!(other.markers.is_empty());
    }

    #[test]
    fn fallthrough_is_idle() {
        let d = decide("Sing a song", &[], &[]);
        assert_eq!(d.mode, Mode::Idle);
        assert_eq!(d.param_updates["max_lin_vel"], 0.0);
        assert_eq!(d.param_updates["max_rot_vel"], 0.0);
    }

    #[test]
    fn decisions_are_deterministic() {
        let dets = [det("doc", "doctor", DetectionKind::Pedestrian, 4.0)];
        let a = decide("Follow the doctor", &dets, &[]);
        let b = decide("Follow the doctor", &dets, &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn bad_tables_are_rejected() {
        let text = "[[rule]]\nname='x'\nmode='goal'\nparams={nope=1.0}\n[fallback]\nmode='idle'\n";
        assert!(RuleTable::parse(text).is_err());
        let text = "[fallback]\nmode='idle'\nextra=1\n";
        assert!(RuleTable::parse(text).is_err());
        let text = "[[rule]]\nname='x'\nmode='goal'\n[[rule.markers]]\nsubject='region'\ncost_value=300.0\ninflation_radius=1.0\ndecay_rate=0.0\n[fallback]\nmode='idle'\n";
        assert!(RuleTable::parse(text).is_err());
    }
}
