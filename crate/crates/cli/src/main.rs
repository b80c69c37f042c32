//! `pessimist`: run, sweep, replay and serve pessimistic-agent episodes.
//!
//! Every flag can also be set through an environment variable named
//! `PESSIMIST_<FLAG>` (for example `PESSIMIST_BETA=0.99`).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pessimist_core::agent::AgentConfig;
use pessimist_core::envs::load_scenario;
use pessimist_core::harness::{
    read_jsonl, read_trace_csv, replay_trace, run_episode, run_sweep, summarize, write_csv, write_jsonl,
    write_trace_csv, OutputFormat, SweepSpec, TraceRecord,
};
use pessimist_service::{serve, ServerConfig};

#[derive(Parser)]
#[command(name = "pessimist", version, about = "Pessimistic agents that defer to a mentor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode with the scenario's built-in mentor.
    Run {
        /// Built-in scenario name or path to a scenario file.
        #[arg(long, env = "PESSIMIST_SCENARIO")]
        scenario: String,
        #[arg(long, env = "PESSIMIST_BETA", default_value_t = 0.9)]
        beta: f64,
        #[arg(long, env = "PESSIMIST_GAMMA", default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, env = "PESSIMIST_EPSILON", default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, env = "PESSIMIST_STEPS", default_value_t = 1000)]
        steps: usize,
        #[arg(long, env = "PESSIMIST_SEED", default_value_t = 0)]
        seed: u64,
        /// Where to write the per-step trace; omitted means no trace is kept.
        #[arg(long, env = "PESSIMIST_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "PESSIMIST_FORMAT", default_value = "jsonl", value_parser = parse_format)]
        format: OutputFormat,
    },
    /// Run a grid of episodes described by a JSON sweep file.
    Sweep {
        #[arg(long, env = "PESSIMIST_SPEC")]
        spec: PathBuf,
        /// Overrides the sweep file's `out`; rows go to stdout if neither is set.
        #[arg(long, env = "PESSIMIST_OUT")]
        out: Option<PathBuf>,
    },
    /// Recompute posteriors and metrics along a saved trace.
    Replay {
        #[arg(long, env = "PESSIMIST_TRACE")]
        trace: PathBuf,
        /// The scenario the trace was recorded in.
        #[arg(long, env = "PESSIMIST_SCENARIO")]
        scenario: String,
        #[arg(long, env = "PESSIMIST_GAMMA", default_value_t = 0.9)]
        gamma: f64,
    },
    /// Serve mentor sessions over WebSocket, with snapshots over HTTP.
    Serve {
        #[arg(long, env = "PESSIMIST_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "PESSIMIST_PORT", default_value_t = 8750)]
        port: u16,
        /// Abort an episode whose deferral goes unanswered this long.
        #[arg(long, env = "PESSIMIST_MENTOR_TIMEOUT_SECS")]
        mentor_timeout_secs: Option<f64>,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: pessimist_core::Error| e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn format_of(path: &Path) -> OutputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => OutputFormat::Csv,
        _ => OutputFormat::Jsonl,
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, beta, gamma, epsilon, steps, seed, out, format } => {
            let bundle = load_scenario(&scenario)?;
            let cfg = AgentConfig::new(beta, gamma, epsilon)?;
            let outcome = run_episode(&bundle, cfg, steps, seed)?;
            if let Some(path) = &out {
                let w = create(path)?;
                match format {
                    OutputFormat::Csv => write_trace_csv(w, &outcome.trace)?,
                    OutputFormat::Jsonl => write_jsonl(w, &outcome.trace)?,
                }
                log::info!("wrote {} steps to {}", outcome.trace.len(), path.display());
            }
            print_json(&outcome.metrics)?;
            if let Some(e) = outcome.error {
                bail!("episode aborted after {} steps: {e}", outcome.trace.len());
            }
        }
        Command::Sweep { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("cannot read {}", spec.display()))?;
            let mut spec: SweepSpec =
                serde_json::from_str(&text).with_context(|| format!("invalid sweep file {}", spec.display()))?;
            if let Some(out) = out {
                spec.out = Some(out.display().to_string());
            }
            let rows = run_sweep(&spec)?;
            match &spec.out {
                Some(path) => {
                    let w = create(Path::new(path))?;
                    match spec.format {
                        OutputFormat::Csv => write_csv(w, &rows)?,
                        OutputFormat::Jsonl => write_jsonl(w, &rows)?,
                    }
                    log::info!("wrote {} rows to {path}", rows.len());
                }
                None => write_jsonl(io::stdout().lock(), &rows)?,
            }
            let mut err = io::stderr().lock();
            for s in summarize(&rows) {
                writeln!(err, "{}", serde_json::to_string(&s)?)?;
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                bail!("{failed} of {} episodes aborted; see the `error` column", rows.len());
            }
        }
        Command::Replay { trace, scenario, gamma } => {
            let f = File::open(&trace).with_context(|| format!("cannot open {}", trace.display()))?;
            let records: Vec<TraceRecord> = match format_of(&trace) {
                OutputFormat::Csv => read_trace_csv(BufReader::new(f))?,
                OutputFormat::Jsonl => read_jsonl(BufReader::new(f))?,
            };
            let bundle = load_scenario(&scenario)?;
            let report = replay_trace(&bundle, &records, gamma)?;
            print_json(&report.metrics)?;
            if !report.posterior_mismatches.is_empty() {
                bail!(
                    "logged posteriors differ from the replay at steps {:?}",
                    report.posterior_mismatches
                );
            }
        }
        Command::Serve { host, port, mentor_timeout_secs } => {
            let mentor_timeout = match mentor_timeout_secs {
                Some(s) if !(s.is_finite() && s > 0.0) => bail!("--mentor-timeout-secs must be positive"),
                s => s.map(Duration::from_secs_f64),
            };
            let listener =
                TcpListener::bind((host.as_str(), port)).with_context(|| format!("cannot bind {host}:{port}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve(listener, ServerConfig { mentor_timeout })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("PESSIMIST_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
