//! Replays directives recorded in an earlier run.

use std::path::Path;

use serde::Deserialize;

use super::{DecisionInput, Directive, Modulator};
use crate::error::{Error, Result};

/// Emits, at each decision, the newest recorded directive issued at or
/// before the current sim time; before the first one it is an error.
#[derive(Debug, Clone)]
pub struct ReplayModulator {
    log: Vec<Directive>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LogDoc {
    Directives(Vec<Directive>),
    Report { directives: Vec<Applied> },
}

#[derive(Deserialize)]
struct Applied {
    directive: Directive,
}

impl ReplayModulator {
    pub fn new(mut log: Vec<Directive>) -> Result<Self> {
        for d in &log {
            d.validate()?;
        }
        log.sort_by(|a, b| a.issued_at.total_cmp(&b.issued_at));
        Ok(ReplayModulator { log })
    }

    /// Accepts either a JSON array of directives or an episode report.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: LogDoc =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        match doc {
            LogDoc::Directives(v) => ReplayModulator::new(v),
            LogDoc::Report { directives } => {
                ReplayModulator::new(directives.into_iter().map(|a| a.directive).collect())
            }
        }
    }

    pub fn log(&self) -> &[Directive] {
        &self.log
    }
}

impl Modulator for ReplayModulator {
    fn decide(&mut self, input: &DecisionInput<'_>) -> Result<Directive> {
        let k = self.log.partition_point(|d| d.issued_at <= input.sim_time + 1e-9);
        if k == 0 {
            return Err(Error::Validation(format!("replay log has no directive issued by t = {}", input.sim_time)));
        }
        let mut d = self.log[k - 1].clone();
        d.issued_at = input.sim_time;
        Ok(d)
    }
}
