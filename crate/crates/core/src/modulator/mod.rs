//! Slow loop: directive sources and their scheduling onto the fast loop.

pub mod external;
pub mod replay;
pub mod schedule;
pub mod scripted;
pub mod wire;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::costmap::SocialEntityAttr;
use crate::error::{Error, Result};
use crate::planner::{ParamUpdates, SfmParams};
use crate::world::{Detection, RobotState};

pub use external::{ExternalModulator, ThreadedModulator};
pub use replay::ReplayModulator;
pub use schedule::Scheduler;
pub use scripted::{RuleTable, ScriptedModulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Follow,
    Goal,
    Explore,
    Idle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Follow => "follow",
            Mode::Goal => "goal",
            Mode::Explore => "explore",
            Mode::Idle => "idle",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "follow" => Some(Mode::Follow),
            "goal" => Some(Mode::Goal),
            "explore" => Some(Mode::Explore),
            "idle" => Some(Mode::Idle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalSpec {
    Point { x: f64, y: f64 },
    Region { region_id: String },
}

/// One slow-loop output bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub mode: Mode,
    #[serde(default)]
    pub param_updates: ParamUpdates,
    #[serde(default)]
    pub markers: Vec<SocialEntityAttr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalSpec>,
    #[serde(default)]
    pub issued_at: f64,
}

impl Directive {
    pub fn new(mode: Mode) -> Self {
        Directive { mode, param_updates: ParamUpdates::new(), markers: Vec::new(), goal: None, issued_at: 0.0 }
    }

    /// Checks parameter keys and values and every marker.
    pub fn validate(&self) -> Result<()> {
        SfmParams::check_keys(self.param_updates.keys())?;
        SfmParams::default().apply_param_update(&self.param_updates)?;
        for m in &self.markers {
            m.validate()?;
        }
        if !self.issued_at.is_finite() || self.issued_at < 0.0 {
            return Err(Error::Validation("issued_at must be a finite time ≥ 0".into()));
        }
        Ok(())
    }

    /// Band marker of the follow target, if any.
    pub fn follow_marker(&self) -> Option<&SocialEntityAttr> {
        self.markers.iter().find(|m| m.band.is_some())
    }
}

/// Everything a modulator may look at when deciding.
#[derive(Debug, Clone, Copy)]
pub struct DecisionInput<'a> {
    pub instruction: &'a str,
    pub detections: &'a [Detection],
    pub robot: &'a RobotState,
    pub sim_time: f64,
    /// Directives issued earlier in the episode, oldest first.
    pub history: &'a [Directive],
    /// Navigation goal handed to the robot by the task, when it has one.
    pub task_goal: Option<&'a GoalSpec>,
}

pub trait Modulator: Send {
    /// Produces a complete directive. Must not touch world state.
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Directive>;
}

impl<M: Modulator + ?Sized> Modulator for Box<M> {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Directive> {
        (**self).decide(input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Scripted,
    Replay,
    External,
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scripted" => Ok(SourceKind::Scripted),
            "replay" => Ok(SourceKind::Replay),
            "external" => Ok(SourceKind::External),
            other => Err(Error::Validation(format!("unknown modulator source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorConfig {
    /// Seconds between decisions.
    #[serde(default = "default_period")]
    pub decision_period: f64,
    /// Sim-time seconds between issuing a directive and applying it.
    #[serde(default)]
    pub injected_latency: f64,
    #[serde(default = "default_source")]
    pub source: SourceKind,
    /// Rule table for the scripted source; the bundled table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    /// Directive log for the replay source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_log: Option<PathBuf>,
    /// Endpoint for the external source; `MODULATOR_URL` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Wall-clock request timeout for the external source, seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Run decisions on a worker thread instead of inline.
    #[serde(default)]
    pub asynchronous: bool,
}

fn default_period() -> f64 {
    10.0
}

fn default_source() -> SourceKind {
    SourceKind::Scripted
}

fn default_timeout() -> f64 {
    30.0
}

impl Default for ModulatorConfig {
    fn default() -> Self {
        ModulatorConfig {
            decision_period: default_period(),
            injected_latency: 0.0,
            source: SourceKind::Scripted,
            rules: None,
            replay_log: None,
            endpoint: None,
            timeout: default_timeout(),
            asynchronous: false,
        }
    }
}

impl ModulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decision_period > 0.0) || !self.decision_period.is_finite() {
            return Err(Error::Validation("decision_period must be > 0".into()));
        }
        if !(self.injected_latency >= 0.0) || !self.injected_latency.is_finite() {
            return Err(Error::Validation("injected_latency must be ≥ 0".into()));
        }
        if !(self.timeout > 0.0) {
            return Err(Error::Validation("timeout must be > 0".into()));
        }
        if self.source == SourceKind::Replay && self.replay_log.is_none() {
            return Err(Error::Validation("replay source needs replay_log".into()));
        }
        Ok(())
    }

    /// Instantiates the configured source.
    pub fn build(&self) -> Result<Box<dyn Modulator>> {
        self.validate()?;
        match self.source {
            SourceKind::Scripted => {
                let table = match &self.rules {
                    Some(p) => RuleTable::load(p)?,
                    None => RuleTable::bundled(),
                };
                Ok(Box::new(ScriptedModulator::new(table)))
            }
            SourceKind::Replay => {
                let path = self.replay_log.as_ref().expect("validated");
                Ok(Box::new(ReplayModulator::load(path)?))
            }
            SourceKind::External => {
                let url = match &self.endpoint {
                    Some(u) => u.clone(),
                    None => std::env::var("MODULATOR_URL")
                        .map_err(|_| Error::Validation("external source needs MODULATOR_URL or endpoint".into()))?,
                };
                Ok(Box::new(ExternalModulator::new(url, self.timeout)))
            }
        }
    }
}
