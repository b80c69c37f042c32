use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, EpisodeMetrics, EpisodeOutcome, OutputFormat};
use crate::agent::{AgentConfig, ZNoise};
use crate::envs::{load_scenario, ScenarioBundle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Built-in scenario name or scenario file path.
    pub scenario: String,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub steps: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub z_noise: ZNoise,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_gamma() -> f64 {
    0.9
}

fn default_epsilon() -> f64 {
    0.1
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig("betas and seeds must be non-empty".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        for &b in &self.betas {
            self.agent_config(b)?;
        }
        Ok(())
    }

    pub fn agent_config(&self, beta: f64) -> Result<AgentConfig> {
        AgentConfig::new(beta, self.gamma, self.epsilon)?.with_z_noise(self.z_noise)
    }
}

/// One episode of a sweep, flattened for tabular output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub beta: f64,
    pub seed: u64,
    pub steps: usize,
    pub query_count: usize,
    pub query_rate: f64,
    pub query_rate_first10: f64,
    pub query_rate_last10: f64,
    pub heads_fraction: Option<f64>,
    pub heads_fraction_final_half: Option<f64>,
    pub discounted_return_final: f64,
    pub mean_reward: f64,
    pub zero_condition_count: usize,
    pub first_event_time: Option<usize>,
    pub event_caused_by_agent: bool,
    pub mentor_zero_action: bool,
    pub aborted: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn new(scenario: &str, beta: f64, seed: u64, m: &EpisodeMetrics, error: Option<String>) -> Self {
        Self {
            scenario: scenario.to_string(),
            beta,
            seed,
            steps: m.steps,
            query_count: m.query_count,
            query_rate: m.query_rate,
            query_rate_first10: m.query_rate_first10,
            query_rate_last10: m.query_rate_last10,
            heads_fraction: m.heads_fraction,
            heads_fraction_final_half: m.heads_fraction_final_half,
            discounted_return_final: m.discounted_return_final,
            mean_reward: m.mean_reward,
            zero_condition_count: m.zero_condition_count,
            first_event_time: m.first_event_time,
            event_caused_by_agent: m.event_caused_by_agent,
            mentor_zero_action: m.mentor_zero_action,
            aborted: m.aborted,
            error,
        }
    }

    fn from_outcome(scenario: &str, beta: f64, seed: u64, out: Result<EpisodeOutcome>) -> Self {
        match out {
            Ok(o) => Self::new(scenario, beta, seed, &o.metrics, o.error),
            Err(e) => Self::new(
                scenario,
                beta,
                seed,
                &EpisodeMetrics::from_trace(&[], 0.0, None, true),
                Some(e.to_string()),
            ),
        }
    }
}

/// Loads the scenario and runs every `(beta, seed)` episode.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let bundle = load_scenario(&spec.scenario)?;
    run_sweep_with(&bundle, spec)
}

/// Episodes run in parallel; rows come back sorted by `(beta, seed)`.
/// A failing episode yields a row with `error` set instead of failing the sweep.
pub fn run_sweep_with(bundle: &ScenarioBundle, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .betas
        .iter()
        .flat_map(|&b| spec.seeds.iter().map(move |&s| (b, s)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(beta, seed)| {
            let out = spec
                .agent_config(beta)
                .and_then(|cfg| run_episode(bundle, cfg, spec.steps, seed));
            SweepRow::from_outcome(&spec.scenario, beta, seed, out)
        })
        .collect();
    rows.sort_by(|a, b| a.beta.total_cmp(&b.beta).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

/// Mean of one metric at one `beta` with a 95% normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub beta: f64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

type Getter = fn(&SweepRow) -> Option<f64>;

const METRICS: [(&str, Getter); 11] = [
    ("query_count", |r| Some(r.query_count as f64)),
    ("query_rate", |r| Some(r.query_rate)),
    ("query_rate_first10", |r| Some(r.query_rate_first10)),
    ("query_rate_last10", |r| Some(r.query_rate_last10)),
    ("heads_fraction", |r| r.heads_fraction),
    ("heads_fraction_final_half", |r| r.heads_fraction_final_half),
    ("discounted_return_final", |r| Some(r.discounted_return_final)),
    ("mean_reward", |r| Some(r.mean_reward)),
    ("zero_condition_count", |r| Some(r.zero_condition_count as f64)),
    ("event_caused_by_agent", |r| Some(r.event_caused_by_agent as u8 as f64)),
    ("mentor_zero_action", |r| Some(r.mentor_zero_action as u8 as f64)),
];

/// Per-beta summaries of every metric, skipping rows with errors and
/// metrics a scenario does not define.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let mut out = Vec::new();
    for beta in betas {
        let group: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.beta == beta && r.error.is_none())
            .collect();
        for (name, get) in METRICS {
            let xs: Vec<f64> = group.iter().filter_map(|r| get(r)).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let half = if xs.len() > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                1.96 * (var / n).sqrt()
            } else {
                0.0
            };
            out.push(SummaryRow {
                beta,
                metric: name.to_string(),
                n: xs.len(),
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
            });
        }
    }
    out
}
