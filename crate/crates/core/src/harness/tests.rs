use std::sync::Arc;

use super::*;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::metrics::MetricsConfig;
use crate::modulator::{DecisionInput, Directive, GoalSpec, Mode, Modulator, ModulatorConfig};
use crate::world::test_support::{open_scenario, standing_pedestrian};
use crate::world::{GoalRule, Region, RegionKind, ScenarioSpec};

/// Issues the same directive at every decision.
struct Fixed(Directive);

impl Modulator for Fixed {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Directive> {
        Ok(Directive { issued_at: input.sim_time, ..self.0.clone() })
    }
}

fn goal_directive(x: f64, y: f64) -> Directive {
    let mut d = Directive::new(Mode::Goal);
    d.param_updates.insert("sfm_goal_weight".into(), 1.0);
    d.goal = Some(GoalSpec::Point { x, y });
    d
}

fn open_goal_scenario() -> Arc<ScenarioSpec> {
    let mut s = open_scenario(100, 0.1);
    s.task.goal = GoalRule::Point { point: [8.0, 5.0], radius: 0.4 };
    s.task.time_limit = 40.0;
    Arc::new(s)
}

fn run_fixed(s: Arc<ScenarioSpec>, d: Directive, cfg: &ModulatorConfig, seed: u64) -> crate::metrics::EpisodeReport {
    run_episode_with(s, Box::new(Fixed(d)), cfg, seed, &EpisodeOptions::default()).unwrap()
}

#[test]
fn empty_map_goal_run_succeeds() {
    let r = run_fixed(open_goal_scenario(), goal_directive(8.0, 5.0), &ModulatorConfig::default(), 3);
    assert!(r.outcome.success, "{:?}", r.outcome);
    assert!(r.collisions.is_empty());
    assert_eq!(r.metrics.region_score, None);
    assert!(r.ticks() < 800);
}

#[test]
fn same_seed_gives_identical_reports() {
    let s = open_goal_scenario();
    let cfg = ModulatorConfig::default();
    let a = serde_json::to_string(&run_fixed(s.clone(), goal_directive(8.0, 5.0), &cfg, 11)).unwrap();
    let b = serde_json::to_string(&run_fixed(s.clone(), goal_directive(8.0, 5.0), &cfg, 11)).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&run_fixed(s, goal_directive(8.0, 5.0), &cfg, 12)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn directives_apply_after_injected_latency() {
    let cfg = ModulatorConfig { injected_latency: 2.0, ..ModulatorConfig::default() };
    let r = run_fixed(open_goal_scenario(), goal_directive(8.0, 5.0), &cfg, 1);
    assert!(!r.directives.is_empty());
    for a in &r.directives {
        assert!((a.applied_at - a.directive.issued_at - 2.0).abs() < 1e-6, "{a:?}");
    }
    // idle until the first directive lands
    let before: Vec<_> = r.trajectory.samples.iter().filter(|s| s.t < 2.0 - 1e-9).collect();
    assert!(before.iter().all(|s| s.v == 0.0));
}

#[test]
fn directive_swaps_are_atomic() {
    let s = open_goal_scenario();
    let opts = EpisodeOptions { check_atomicity: true, ..EpisodeOptions::default() };
    let cfg = ModulatorConfig { decision_period: 0.5, ..ModulatorConfig::default() };
    let r = run_episode_with(s, Box::new(Fixed(goal_directive(8.0, 5.0))), &cfg, 2, &opts).unwrap();
    assert!(r.directives.len() > 3);
    for a in &r.directives {
        assert_eq!(a.params_after.sfm_goal_weight, 1.0);
    }
}

#[test]
fn idle_directive_holds_the_robot() {
    let mut d = Directive::new(Mode::Idle);
    d.param_updates.insert("max_lin_vel".into(), 0.0);
    d.param_updates.insert("max_rot_vel".into(), 0.0);
    let r = run_fixed(open_goal_scenario(), d, &ModulatorConfig::default(), 4);
    let start = r.trajectory.samples[0].pose;
    let end = r.trajectory.samples.last().unwrap().pose;
    assert_eq!((start.x, start.y), (end.x, end.y));
    assert!(!r.metrics.success);
    assert_eq!(r.directives[0].params_after.max_lin_vel, 0.0);
}

#[test]
fn jitter_stays_in_bounds_and_is_seeded() {
    let s = open_goal_scenario();
    let a = initial_conditions(&s, 5, true);
    assert_eq!(a, initial_conditions(&s, 5, true));
    assert_ne!(a, initial_conditions(&s, 6, true));
    let n = s.robot_start;
    assert!((a.start.x - n.x).abs() <= 0.3 && (a.start.y - n.y).abs() <= 0.3);
    assert!((a.start.theta - n.theta).abs() <= 15f64.to_radians() + 1e-12);
    let fixed = initial_conditions(&s, 5, false);
    assert_eq!(fixed.start, n);
}

fn two_region_report() -> crate::metrics::EpisodeReport {
    let mut s = open_scenario(100, 0.1);
    let sq = |x0: f64, y0: f64| {
        vec![Vec2::new(x0, y0), Vec2::new(x0 + 1.0, y0), Vec2::new(x0 + 1.0, y0 + 1.0), Vec2::new(x0, y0 + 1.0)]
    };
    s.regions = vec![
        Region {
            id: "lobby".into(),
            kind: RegionKind::Neutral,
            polygon: sq(6.0, 4.5),
            severity_weight: 0.0,
            anchor: None,
        },
        Region {
            id: "store".into(),
            kind: RegionKind::Caution,
            polygon: sq(2.0, 7.0),
            severity_weight: 20.0,
            anchor: None,
        },
    ];
    s.task.goal = GoalRule::Point { point: [8.0, 5.0], radius: 0.4 };
    s.task.caution = vec!["store".into()];
    s.task.keep_away = vec!["p".into()];
    s.pedestrians = vec![standing_pedestrian("p", "patient", Vec2::new(7.0, 7.0))];
    let cfg = ModulatorConfig::default();
    run_fixed(Arc::new(s), goal_directive(8.0, 5.0), &cfg, 9)
}

#[test]
fn csv_has_one_row_per_tick_and_round_trips() {
    let r = two_region_report();
    let text = export_csv(&r).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with(export::CSV_META_PREFIX));
    assert_eq!(lines[1], "t,x,y,theta,v,omega,regions,d:p");
    assert_eq!(lines.len() - 2, r.ticks());
    assert!(text.contains("lobby"));
    let cfg = MetricsConfig::default();
    let back = replay_csv(&text, &cfg).unwrap();
    assert!(back.matches_report);
    assert_eq!(back.metrics, r.metrics);
    assert!(!back.config_mismatch);
}

#[test]
fn svg_shades_each_region() {
    let svg = export_svg(&two_region_report()).unwrap();
    assert_eq!(svg.matches(r#"class="region""#).count(), 2);
    assert_eq!(svg.matches(r#"class="robot""#).count(), 1);
    assert_eq!(svg.matches(r#"class="pedestrian""#).count(), 1);
    assert!(svg.matches(r#"class="directive""#).count() >= 1);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn replay_rejects_bad_logs_and_flags_config_changes() {
    let r = two_region_report();
    let cfg = MetricsConfig::default();
    assert!(replay_report(&r, &cfg).unwrap().matches_report);

    let mut shuffled = r.clone();
    shuffled.trajectory.samples.swap(3, 7);
    assert!(matches!(replay_report(&shuffled, &cfg), Err(Error::Log(_))));

    let mut truncated = r.clone();
    truncated.region_occupancy.pop();
    assert!(matches!(replay_report(&truncated, &cfg), Err(Error::Log(_))));

    let text = export_csv(&r).unwrap();
    let cut = &text[..text.len() - text.lines().last().unwrap().len() - 1];
    assert!(matches!(replay_csv(cut, &cfg), Err(Error::Log(_))));

    let changed = MetricsConfig { d_safe: 3.0, ..MetricsConfig::default() };
    let o = replay_report(&r, &changed).unwrap();
    assert!(o.config_mismatch);
    assert!(!o.matches_report);
}

#[test]
fn batch_aggregates_in_order() {
    let s = open_goal_scenario();
    let suite = SuiteConfig {
        scenarios: vec!["unused".into()],
        repetitions: 3,
        seed: 7,
        modulator: ModulatorConfig::default(),
        metrics: MetricsConfig::default(),
        episode: EpisodeOptions::default(),
        output: None,
    };
    let r = batch::run_batch_on(&suite, &[s]).unwrap();
    assert_eq!(r.episodes.len(), 3);
    assert_eq!(r.episodes.iter().map(|e| e.repetition).collect::<Vec<_>>(), vec![0, 1, 2]);
    // no instruction: the fallback holds the robot, so nothing succeeds
    assert_eq!(r.summaries[0].success_rate, 0.0);
    let csv = batch::results_csv(&r.summaries).unwrap();
    assert!(csv.starts_with(
        "task,episodes,success_rate,collision_rate,curvature,smoothness_score,subject_score,region_score"
    ));
    assert!(csv.lines().nth(1).unwrap().ends_with("none,none"));
    let again = batch::run_batch_on(&suite, &[open_goal_scenario()]).unwrap();
    assert_eq!(csv, batch::results_csv(&again.summaries).unwrap());
}

#[test]
fn bundled_scenarios_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/scenarios");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let s = crate::world::load_scenario(&p).unwrap();
            assert_eq!(s.static_map.geometry.width, 200);
            n += 1;
        }
    }
    assert_eq!(n, 5);
}

#[test]
fn bundled_suite_and_metrics_load() {
    let assets = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    let suite = SuiteConfig::load(&assets.join("suite.toml")).unwrap();
    assert_eq!(suite.scenarios.len(), 5);
    assert!(suite.scenarios.iter().all(|p| p.exists()));
    assert_eq!(MetricsConfig::load(&assets.join("metrics.toml")).unwrap(), MetricsConfig::default());
}

#[test]
fn bundled_episode_replays_from_disk() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/scenarios/follow_doctor.toml");
    let s = Arc::new(crate::world::load_scenario(&path).unwrap());
    let report = run_episode(s, &ModulatorConfig::default(), 3, &EpisodeOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    std::fs::write(&json, serde_json::to_string(&report).unwrap()).unwrap();
    let cfg = MetricsConfig::default();
    assert!(replay_path(&json, &cfg).unwrap().matches_report);
    let csv = dir.path().join("r.csv");
    std::fs::write(&csv, export_csv(&report).unwrap()).unwrap();
    assert!(replay_path(&csv, &cfg).unwrap().matches_report);
}
