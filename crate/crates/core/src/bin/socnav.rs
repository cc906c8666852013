use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use socnav::error::{Error, Result};
use socnav::harness::batch::results_csv;
use socnav::harness::export::write_export;
use socnav::harness::{
    load_report, replay_path, run_batch, run_episode, write_batch, EpisodeOptions, ExportFormat, SuiteConfig,
};
use socnav::metrics::MetricsConfig;
use socnav::modulator::{ModulatorConfig, SourceKind};
use socnav::world::load_scenario;

#[derive(Parser)]
#[command(name = "socnav", version, about = "Social navigation benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "scripted")]
        modulator: SourceKind,
        /// Injected slow-loop latency in milliseconds.
        #[arg(long, default_value_t = 0.0)]
        latency: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Directive log for `--modulator replay`.
        #[arg(long)]
        replay_log: Option<PathBuf>,
        /// Endpoint for `--modulator external`; defaults to MODULATOR_URL.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Disable the social costmap layer.
        #[arg(long)]
        no_social: bool,
        /// Use the nominal start and pedestrian timing.
        #[arg(long)]
        no_randomize: bool,
    },
    /// Run a suite and write results.csv, episodes.csv and per-episode reports.
    Batch {
        #[arg(long)]
        suite: PathBuf,
        /// Overrides the suite's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics from a report (.json) or exported trajectory (.csv).
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Export a report as a per-tick CSV or an SVG overview.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        format: ExportFormat,
        /// Defaults to the log path with the format's extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn metrics_config(path: Option<&Path>) -> Result<MetricsConfig> {
    path.map_or_else(|| Ok(MetricsConfig::default()), MetricsConfig::load)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Cmd::Run {
            scenario,
            seed,
            modulator,
            latency,
            out,
            replay_log,
            endpoint,
            metrics,
            no_social,
            no_randomize,
        } => {
            let spec = Arc::new(load_scenario(&scenario)?);
            let cfg = ModulatorConfig {
                source: modulator,
                injected_latency: latency / 1000.0,
                replay_log,
                endpoint,
                ..ModulatorConfig::default()
            };
            let mut opts = EpisodeOptions { metrics: metrics_config(metrics.as_deref())?, ..EpisodeOptions::default() };
            opts.fast.social_layer = !no_social;
            opts.randomize = !no_randomize;
            let report = run_episode(spec, &cfg, seed, &opts)?;
            create_dir(&out)?;
            let path = out.join(format!("{}_{seed}.json", report.scenario_id));
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Log(e.to_string()))?;
            std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
            println!("{}", serde_json::to_string(&report.metrics).map_err(|e| Error::Log(e.to_string()))?);
            println!("report: {}", path.display());
            Ok(true)
        }
        Cmd::Batch { suite, out } => {
            let mut suite = SuiteConfig::load(&suite)?;
            if out.is_some() {
                suite.output = out;
            }
            let dir = suite.output.clone().unwrap_or_else(|| PathBuf::from("out"));
            let result = run_batch(&suite)?;
            create_dir(&dir)?;
            write_batch(&result, &dir)?;
            print!("{}", results_csv(&result.summaries)?);
            Ok(true)
        }
        Cmd::Replay { log, metrics } => {
            let cfg = metrics_config(metrics.as_deref())?;
            let r = replay_path(&log, &cfg)?;
            println!("{}", serde_json::to_string(&r.metrics).map_err(|e| Error::Log(e.to_string()))?);
            println!("matches_report: {}", r.matches_report);
            if r.config_mismatch {
                println!("config_mismatch: the log was scored under a different metrics config");
            }
            Ok(r.matches_report || r.config_mismatch)
        }
        Cmd::Export { log, format, out } => {
            let report = load_report(&log)?;
            let ext = match format {
                ExportFormat::Csv => "csv",
                ExportFormat::Svg => "svg",
            };
            let out = out.unwrap_or_else(|| log.with_extension(ext));
            write_export(&report, format, &out)?;
            println!("{}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
