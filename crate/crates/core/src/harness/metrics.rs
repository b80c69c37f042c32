use serde::{Deserialize, Serialize};

use super::TraceRecord;

/// Summary statistics of one episode, computed from its trace alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub steps: usize,
    pub query_count: usize,
    pub query_rate: f64,
    /// Query rate over the first tenth of the steps.
    pub query_rate_first10: f64,
    /// Query rate over the last tenth of the steps.
    pub query_rate_last10: f64,
    /// Fraction of steps taking the scenario's focus action.
    pub heads_fraction: Option<f64>,
    pub heads_fraction_final_half: Option<f64>,
    /// Mean normalized discounted return from each start point in the
    /// `[80%, 90%)` band of the episode, truncated at the episode's end.
    pub discounted_return_final: f64,
    pub mean_reward: f64,
    pub zero_condition_count: usize,
    /// First step (1-based) at which the event had happened.
    pub first_event_time: Option<usize>,
    /// The event first happened on a step the agent chose itself.
    pub event_caused_by_agent: bool,
    /// The agent itself took some action the true mentor never takes.
    pub mentor_zero_action: bool,
    pub aborted: bool,
}

/// Width of the early and late windows: a tenth of the steps, at least one.
pub fn window(steps: usize) -> usize {
    (steps / 10).max(1).min(steps)
}

fn rate(records: &[TraceRecord]) -> f64 {
    if records.is_empty() {
        0.0
    } else {
        records.iter().filter(|r| r.queried).count() as f64 / records.len() as f64
    }
}

fn fraction_of(records: &[TraceRecord], action: usize) -> f64 {
    if records.is_empty() {
        0.0
    } else {
        records.iter().filter(|r| r.action_index == action).count() as f64 / records.len() as f64
    }
}

/// `(1 - gamma) sum_j gamma^j r_{s+j}` up to the end of `rewards`.
fn discounted_from(rewards: &[f64], start: usize, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut discount = 1.0;
    for r in &rewards[start..] {
        acc += discount * r;
        discount *= gamma;
        if discount < 1e-15 {
            break;
        }
    }
    (1.0 - gamma) * acc
}

impl EpisodeMetrics {
    pub fn from_trace(
        trace: &[TraceRecord],
        gamma: f64,
        focus_action: Option<usize>,
        aborted: bool,
    ) -> Self {
        let n = trace.len();
        let w = window(n);
        let rewards: Vec<f64> = trace.iter().map(|r| r.reward).collect();
        let discounted_return_final = if n == 0 {
            0.0
        } else {
            let lo = n * 8 / 10;
            let hi = (n * 9 / 10).max(lo + 1).min(n);
            (lo..hi).map(|s| discounted_from(&rewards, s, gamma)).sum::<f64>() / (hi - lo) as f64
        };
        let first_event = trace.iter().position(|r| r.event == Some(true));
        Self {
            steps: n,
            query_count: trace.iter().filter(|r| r.queried).count(),
            query_rate: rate(trace),
            query_rate_first10: rate(&trace[..w]),
            query_rate_last10: rate(&trace[n - w..]),
            heads_fraction: focus_action.map(|a| fraction_of(trace, a)),
            heads_fraction_final_half: focus_action.map(|a| fraction_of(&trace[n / 2..], a)),
            discounted_return_final,
            mean_reward: if n == 0 { 0.0 } else { rewards.iter().sum::<f64>() / n as f64 },
            zero_condition_count: trace.iter().filter(|r| r.zero_condition).count(),
            first_event_time: first_event.map(|i| trace[i].t),
            event_caused_by_agent: first_event.is_some_and(|i| !trace[i].queried),
            mentor_zero_action: trace.iter().any(|r| !r.queried && r.mentor_prob == 0.0),
            aborted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, action: usize, reward: f64, queried: bool) -> TraceRecord {
        TraceRecord {
            t,
            action: format!("a{action}"),
            action_index: action,
            observation: "-".into(),
            observation_index: 0,
            reward,
            queried,
            x: None,
            y: Some(0.5),
            z: None,
            zero_condition: false,
            model_set_size: 1,
            posterior_top: vec![],
            event: None,
            mentor_prob: 0.5,
        }
    }

    #[test]
    fn empty_trace_is_all_zero() {
        let m = EpisodeMetrics::from_trace(&[], 0.9, Some(0), false);
        assert_eq!(m.steps, 0);
        assert_eq!(m.query_count, 0);
        assert_eq!(m.query_rate_first10, 0.0);
        assert_eq!(m.heads_fraction, Some(0.0));
        assert_eq!(m.first_event_time, None);
    }

    #[test]
    fn windows_and_fractions() {
        let trace: Vec<_> = (0..20)
            .map(|i| rec(i + 1, i % 2, 1.0, i < 2))
            .collect();
        let m = EpisodeMetrics::from_trace(&trace, 0.5, Some(0), false);
        assert_eq!(m.query_count, 2);
        assert_eq!(m.query_rate_first10, 1.0);
        assert_eq!(m.query_rate_last10, 0.0);
        assert_eq!(m.heads_fraction, Some(0.5));
        // Starts 16 and 17 with rewards 1 to the end (4 and 3 terms).
        let want = ((1.0 - 0.5f64.powi(4)) + (1.0 - 0.5f64.powi(3))) / 2.0;
        assert!((m.discounted_return_final - want).abs() < 1e-12);
    }

    #[test]
    fn event_attribution() {
        let mut trace: Vec<_> = (0..5).map(|i| rec(i + 1, 0, 0.5, false)).collect();
        for r in &mut trace[2..] {
            r.event = Some(true);
        }
        trace[2].queried = true;
        let m = EpisodeMetrics::from_trace(&trace, 0.9, None, false);
        assert_eq!(m.first_event_time, Some(3));
        assert!(!m.event_caused_by_agent);
        trace[2].queried = false;
        assert!(EpisodeMetrics::from_trace(&trace, 0.9, None, false).event_caused_by_agent);
    }
}
