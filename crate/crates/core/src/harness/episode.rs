//! The composed fast/slow episode loop.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fast::{FastLoop, FastLoopConfig, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::metrics::{
    compute_metrics, evaluate_episode, Component, EpisodeEvent, EpisodeReport, LatencySample, MetricsConfig, Outcome,
    SceneSummary, Trajectory, TrajectorySample,
};
use crate::modulator::{DecisionInput, Directive, GoalSpec, Modulator, ModulatorConfig, Scheduler, ThreadedModulator};
use crate::planner::SfmParams;
use crate::world::scenario::encode_rle_rows;
use crate::world::{detect_entities, CollisionEvent, CollisionTarget, FovConfig, GoalRule, ScenarioSpec, World};

/// Start-pose jitter half-widths and pedestrian phase range.
pub const START_JITTER_XY: f64 = 0.3;
pub const START_JITTER_THETA_DEG: f64 = 15.0;
pub const PHASE_RANGE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeOptions {
    pub dt: f64,
    pub fov: FovConfig,
    pub fast: FastLoopConfig,
    pub params: SfmParams,
    pub metrics: MetricsConfig,
    /// Jitter the start pose and pedestrian phases from the seed.
    pub randomize: bool,
    /// Fail the episode if a tick ever sees a partially applied directive.
    pub check_atomicity: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        EpisodeOptions {
            dt: DEFAULT_DT,
            fov: FovConfig::default(),
            fast: FastLoopConfig::default(),
            params: SfmParams::default(),
            metrics: MetricsConfig::default(),
            randomize: true,
            check_atomicity: false,
        }
    }
}

/// Seeded initial conditions of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub start: Pose,
    pub phases: Vec<f64>,
}

/// Draws a collision-free jittered start and per-pedestrian phase offsets.
/// Falls back to the nominal start if no jittered pose is free.
pub fn initial_conditions(scenario: &ScenarioSpec, seed: u64, randomize: bool) -> InitialConditions {
    let nominal = scenario.robot_start;
    if !randomize {
        return InitialConditions { start: nominal, phases: vec![0.0; scenario.pedestrians.len()] };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = (0..scenario.pedestrians.len()).map(|_| rng.gen_range(0.0..PHASE_RANGE)).collect();
    let th = START_JITTER_THETA_DEG.to_radians();
    let mut start = nominal;
    for _ in 0..32 {
        let cand = Pose::new(
            nominal.x + rng.gen_range(-START_JITTER_XY..=START_JITTER_XY),
            nominal.y + rng.gen_range(-START_JITTER_XY..=START_JITTER_XY),
            nominal.theta + rng.gen_range(-th..=th),
        );
        if !scenario.static_map.disc_hits_occupied(cand.position(), scenario.robot_radius) {
            start = cand;
            break;
        }
    }
    InitialConditions { start, phases }
}

fn task_goal(scenario: &ScenarioSpec) -> GoalSpec {
    match &scenario.task.goal {
        GoalRule::Region { region } => GoalSpec::Region { region_id: region.clone() },
        GoalRule::Point { point, .. } => GoalSpec::Point { x: point[0], y: point[1] },
    }
}

enum SlowLoop {
    Inline(Box<dyn Modulator>),
    Threaded(ThreadedModulator, Option<Instant>),
}

fn collision_key(e: &CollisionEvent) -> String {
    match &e.target {
        CollisionTarget::Pedestrian(id) => format!("pedestrian:{id}"),
        CollisionTarget::Obstacle => "obstacle".into(),
    }
}

/// Runs one episode with the configured modulator source.
pub fn run_episode(
    scenario: Arc<ScenarioSpec>,
    modulator: &ModulatorConfig,
    seed: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeReport> {
    let source = modulator.build()?;
    run_episode_with(scenario, source, modulator, seed, options)
}

/// Runs one episode with an explicit directive source.
///
/// Per tick: pending instruction updates, a slow-loop decision when due,
/// application of any directive whose latency has elapsed, the fast-loop
/// command, then the world step and logging of the new state.
pub fn run_episode_with(
    scenario: Arc<ScenarioSpec>,
    source: Box<dyn Modulator>,
    modulator: &ModulatorConfig,
    seed: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeReport> {
    modulator.validate()?;
    options.metrics.validate()?;
    if !(options.dt > 0.0) {
        return Err(Error::Validation("dt must be > 0".into()));
    }
    scenario.validate()?;
    let dt = options.dt;
    let init = initial_conditions(&scenario, seed, options.randomize);
    let mut world = World::new(scenario.clone()).with_start(init.start).with_phases(init.phases);
    world.set_limits(options.params.velocity_limits());
    let mut fast = FastLoop::new(&scenario, options.params.clone(), options.fast.clone())?;
    let mut scheduler = Scheduler::new(modulator.injected_latency);
    let mut slow = if modulator.asynchronous {
        SlowLoop::Threaded(ThreadedModulator::spawn(source), None)
    } else {
        SlowLoop::Inline(source)
    };

    let goal_hint = task_goal(&scenario);
    let mut instruction = scenario.instruction.clone();
    let mut updates = scenario.task.instruction_updates.clone();
    updates.sort_by(|a, b| a.at.total_cmp(&b.at));
    let mut next_update = 0;
    let mut next_decision = 0.0;

    let subjects: Vec<String> =
        scenario.task.follow.iter().map(|f| f.target.clone()).chain(scenario.task.keep_away.iter().cloned()).collect();
    let max_ticks = (scenario.task.time_limit / dt - 1e-9).ceil() as usize;

    let mut history: Vec<Directive> = Vec::new();
    let mut applied = Vec::new();
    let mut events = Vec::new();
    let mut latency_log = Vec::new();
    let mut samples = Vec::with_capacity(max_ticks);
    let mut occupancy = Vec::with_capacity(max_ticks);
    let mut distances = Vec::with_capacity(max_ticks);
    let mut collisions = Vec::new();
    let mut in_contact: BTreeSet<String> = BTreeSet::new();
    let mut ped_paths: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    let event = |t: f64, kind: &str, detail: String| EpisodeEvent { t, kind: kind.into(), detail };

    for _ in 0..max_ticks {
        let now = world.time();
        let mut fire = now + 1e-9 >= next_decision;
        while next_update < updates.len() && updates[next_update].at <= now + 1e-9 {
            instruction = updates[next_update].text.clone();
            next_update += 1;
            fire = true;
        }

        let mut decided: Option<Result<Directive>> = None;
        if fire {
            next_decision = now + modulator.decision_period;
            let robot = *world.robot();
            let detections = detect_entities(&world, &robot.pose, &options.fov);
            let input = DecisionInput {
                instruction: &instruction,
                detections: &detections,
                robot: &robot,
                sim_time: now,
                history: &history,
                task_goal: Some(&goal_hint),
            };
            match &mut slow {
                SlowLoop::Inline(m) => {
                    let t0 = Instant::now();
                    let r = m.decide(&input).map(|d| Directive { issued_at: now, ..d });
                    latency_log.push(LatencySample { component: Component::SlowDecide, ms: ms_since(t0) });
                    decided = Some(r);
                }
                SlowLoop::Threaded(t, started) => {
                    if t.submit(&input) {
                        *started = Some(Instant::now());
                    } else {
                        events.push(event(now, "decide_busy", "previous decision still running".into()));
                    }
                }
            }
        }
        if let SlowLoop::Threaded(t, started) = &mut slow {
            if let Some(r) = t.poll() {
                if let Some(t0) = started.take() {
                    latency_log.push(LatencySample { component: Component::SlowDecide, ms: ms_since(t0) });
                }
                decided = Some(r);
            }
        }
        match decided {
            Some(Ok(d)) => match d.validate() {
                Ok(()) => {
                    history.push(d.clone());
                    scheduler.submit(d);
                }
                Err(e) => events.push(event(now, "rejected", e.to_string())),
            },
            Some(Err(Error::Timeout(m))) => events.push(event(now, "timeout", m)),
            Some(Err(e)) => events.push(event(now, "decide_error", e.to_string())),
            None => {}
        }

        if let Some(d) = scheduler.poll(now) {
            match fast.apply(d, now, &mut world) {
                Ok(a) => applied.push(a),
                Err(e) => events.push(event(now, "rejected", e.to_string())),
            }
        }

        let t0 = Instant::now();
        let cmd = fast.step(&world, dt)?;
        latency_log.push(LatencySample { component: Component::FastStep, ms: ms_since(t0) });
        for id in fast.take_unresolved() {
            events.push(event(now, "unresolved_marker", id));
        }
        if options.check_atomicity && !fast.active().is_consistent(fast.base_params()) {
            return Err(Error::Validation(format!("partially applied directive observed at t = {now}")));
        }

        let hits = world.step(cmd, dt);
        let t = world.time();
        let robot = *world.robot();
        let here = robot.position();
        let keys: BTreeSet<String> = hits.iter().map(collision_key).collect();
        for e in hits {
            if !in_contact.contains(&collision_key(&e)) {
                collisions.push(e);
            }
        }
        in_contact = keys;
        samples.push(TrajectorySample { t, pose: robot.pose, v: robot.v, omega: robot.omega });
        occupancy.push(scenario.regions.iter().filter(|r| r.contains(here)).map(|r| r.id.clone()).collect());
        let mut dmap = BTreeMap::new();
        for id in &subjects {
            if let Some((_, at)) = world.pedestrian_by_id(id) {
                dmap.insert(id.clone(), here.distance(at));
            }
        }
        distances.push(dmap);
        for (p, at) in world.pedestrians() {
            ped_paths.entry(p.id.clone()).or_default().push([at.x, at.y]);
        }

        let target_done = scenario.task.follow.as_ref().is_none_or(|f| {
            match (world.pedestrian_by_id(&f.target), scenario.pedestrian(&f.target)) {
                (Some((_, at)), Some(p)) => {
                    let last = p.trajectory[p.trajectory.len() - 1];
                    at.x == last[1] && at.y == last[2]
                }
                _ => true,
            }
        });
        if target_done && scenario.goal_reached(here) {
            break;
        }
    }

    let g = scenario.static_map.geometry;
    let mut report = EpisodeReport {
        scenario_id: scenario.id.clone(),
        seed,
        instruction: scenario.instruction.clone(),
        dt,
        injected_latency: modulator.injected_latency,
        metrics_config_hash: options.metrics.hash(),
        task: scenario.task.clone(),
        regions: scenario.regions.clone(),
        scene: SceneSummary {
            resolution: g.resolution,
            origin: [g.origin.x, g.origin.y],
            width: g.width,
            height: g.height,
            rows: encode_rle_rows(&scenario.static_map),
            pedestrian_paths: ped_paths,
        },
        trajectory: Trajectory { samples },
        collisions,
        region_occupancy: occupancy,
        subject_distances: distances,
        directives: applied,
        events,
        outcome: Outcome { success: false, reason: None, collided: false },
        metrics: Default::default(),
        latency_log,
    };
    report.outcome = evaluate_episode(&report, &scenario.task, &options.metrics);
    report.metrics = compute_metrics(&report, &options.metrics);
    Ok(report)
}

fn ms_since(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64() * 1e3
}
