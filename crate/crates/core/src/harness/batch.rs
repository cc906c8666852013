//! Suites of repeated episodes and their results table.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeOptions};
use crate::error::{Error, Result};
use crate::hash::episode_seed;
use crate::metrics::{aggregate, EpisodeMetrics, EpisodeReport, FailureReason, MetricsConfig, TaskSummary};
use crate::modulator::ModulatorConfig;
use crate::world::{load_scenario, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Scenario files, relative to the suite file.
    pub scenarios: Vec<PathBuf>,
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub modulator: ModulatorConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub episode: EpisodeOptions,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_reps() -> u32 {
    5
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut suite: SuiteConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut suite.scenarios {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = suite.modulator.rules.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        if let Some(p) = suite.modulator.replay_log.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Validation("suite lists no scenarios".into()));
        }
        if self.repetitions < 1 {
            return Err(Error::Validation("repetitions must be ≥ 1".into()));
        }
        self.modulator.validate()?;
        self.metrics.validate()
    }

    /// Episode options with the suite's metrics config.
    pub fn episode_options(&self) -> EpisodeOptions {
        EpisodeOptions { metrics: self.metrics.clone(), ..self.episode.clone() }
    }
}

/// One episode's entry in a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub task: String,
    pub repetition: u32,
    pub seed: u64,
    pub metrics: EpisodeMetrics,
    pub reason: Option<FailureReason>,
    /// Set when the episode could not run; it then counts as a failure.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub summaries: Vec<TaskSummary>,
    pub episodes: Vec<EpisodeRow>,
    /// Reports of the episodes that ran, in `(scenario, repetition)` order.
    pub reports: Vec<EpisodeReport>,
}

/// Loads every scenario of the suite and runs the batch.
pub fn run_batch(suite: &SuiteConfig) -> Result<BatchResult> {
    suite.validate()?;
    let scenarios = suite.scenarios.iter().map(|p| load_scenario(p).map(Arc::new)).collect::<Result<Vec<_>>>()?;
    run_batch_on(suite, &scenarios)
}

/// Runs `repetitions` episodes per scenario. Episodes may run in parallel;
/// results are ordered by scenario, then repetition.
pub fn run_batch_on(suite: &SuiteConfig, scenarios: &[Arc<ScenarioSpec>]) -> Result<BatchResult> {
    suite.validate()?;
    let options = suite.episode_options();
    let jobs: Vec<(usize, u32)> =
        (0..scenarios.len()).flat_map(|s| (0..suite.repetitions).map(move |r| (s, r))).collect();
    let outcomes: Vec<(usize, u32, u64, Result<EpisodeReport>)> = jobs
        .par_iter()
        .map(|&(s, rep)| {
            let sc = &scenarios[s];
            let seed = episode_seed(suite.seed, &sc.id, rep);
            (s, rep, seed, run_episode(sc.clone(), &suite.modulator, seed, &options))
        })
        .collect();

    let mut episodes = Vec::with_capacity(outcomes.len());
    let mut reports = Vec::new();
    for (s, repetition, seed, r) in outcomes {
        let task = scenarios[s].id.clone();
        match r {
            Ok(rep) => {
                episodes.push(EpisodeRow {
                    task,
                    repetition,
                    seed,
                    metrics: rep.metrics,
                    reason: rep.outcome.reason,
                    error: None,
                });
                reports.push(rep);
            }
            Err(e) => episodes.push(EpisodeRow {
                task,
                repetition,
                seed,
                metrics: EpisodeMetrics::default(),
                reason: Some(FailureReason::Aborted),
                error: Some(e.to_string()),
            }),
        }
    }
    let summaries = scenarios
        .iter()
        .map(|sc| {
            let m: Vec<EpisodeMetrics> = episodes.iter().filter(|e| e.task == sc.id).map(|e| e.metrics).collect();
            aggregate(&sc.id, &m)
        })
        .collect();
    Ok(BatchResult { summaries, episodes, reports })
}

/// `"none"` for absent cells, fixed precision otherwise.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.3}"))
}

pub const RESULTS_HEADER: [&str; 8] = [
    "task",
    "episodes",
    "success_rate",
    "collision_rate",
    "curvature",
    "smoothness_score",
    "subject_score",
    "region_score",
];

/// Results table as CSV text.
pub fn results_csv(summaries: &[TaskSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Log(e.to_string());
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for s in summaries {
        w.write_record([
            s.task.clone(),
            s.episodes.to_string(),
            format!("{:.1}", s.success_rate),
            format!("{:.1}", s.collision_rate),
            cell(s.curvature),
            cell(s.smoothness_score),
            cell(s.subject_score),
            cell(s.region_score),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Log(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-episode table as CSV text.
pub fn episodes_csv(rows: &[EpisodeRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Log(e.to_string());
    w.write_record([
        "task",
        "repetition",
        "seed",
        "success",
        "reason",
        "collided",
        "curvature",
        "smoothness_score",
        "subject_score",
        "region_score",
        "band_fraction",
        "error",
    ])
    .map_err(err)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.task.clone(),
            r.repetition.to_string(),
            r.seed.to_string(),
            m.success.to_string(),
            r.reason.map_or("none", |x| x.as_str()).to_string(),
            m.collided.to_string(),
            cell(m.curvature),
            cell(m.smoothness_score),
            cell(m.subject_score),
            cell(m.region_score),
            cell(m.band_fraction),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Log(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `results.csv`, `episodes.csv` and one report per episode into `dir`.
pub fn write_batch(result: &BatchResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).and_then(|mut f| f.write_all(text.as_bytes())).map_err(|e| Error::io(&p, e))
    };
    write("results.csv", &results_csv(&result.summaries)?)?;
    write("episodes.csv", &episodes_csv(&result.episodes)?)?;
    let reports = dir.join("reports");
    std::fs::create_dir_all(&reports).map_err(|e| Error::io(&reports, e))?;
    for (row, rep) in result.episodes.iter().filter(|r| r.error.is_none()).zip(&result.reports) {
        let name = format!("reports/{}_{}.json", row.task, row.repetition);
        let text = serde_json::to_string_pretty(rep).map_err(|e| Error::Log(e.to_string()))?;
        write(&name, &text)?;
    }
    Ok(())
}
