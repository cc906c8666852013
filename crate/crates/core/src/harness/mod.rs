//! Episode runner, batch evaluation, replay and export.

pub mod batch;
pub mod episode;
pub mod export;
pub mod fast;
pub mod replay;

pub use batch::{run_batch, write_batch, BatchResult, SuiteConfig};
pub use episode::{initial_conditions, run_episode, run_episode_with, EpisodeOptions};
pub use export::{export_csv, export_svg, ExportFormat};
pub use fast::{ActiveDirective, FastLoop, FastLoopConfig, DEFAULT_DT};
pub use replay::{load_report, replay_csv, replay_path, replay_report, ReplayOutcome};

#[cfg(test)]
mod tests;
