//! Finite action, observation and reward alphabets.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default reward grid `{0, 1/4, 1/2, 3/4, 1}`.
pub const DEFAULT_REWARDS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// An ordered, duplicate-free list of labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidSpace("alphabet is empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

/// Sorted, duplicate-free reward values in `[0, 1]` that include both 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RewardSpace {
    values: Vec<f64>,
}

impl RewardSpace {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::InvalidSpace("reward space is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidSpace("rewards must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpace(
                "rewards must be strictly ascending".into(),
            ));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(Error::InvalidSpace("rewards must contain 0 and 1".into()));
        }
        Ok(Self { values })
    }

    pub fn default_grid() -> Self {
        Self::new(DEFAULT_REWARDS).unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of an exact reward value.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|v| *v == value)
    }

    /// Index of the reward value nearest to `value` within `1e-9`.
    pub fn index_near(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|v| (v - value).abs() <= 1e-9)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for RewardSpace {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        RewardSpace::new(v)
    }
}

impl From<RewardSpace> for Vec<f64> {
    fn from(r: RewardSpace) -> Self {
        r.values
    }
}

/// The three alphabets an environment is defined over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spaces {
    pub actions: Alphabet,
    pub observations: Alphabet,
    pub rewards: RewardSpace,
}

impl Spaces {
    pub fn new(actions: Alphabet, observations: Alphabet, rewards: RewardSpace) -> Arc<Self> {
        Arc::new(Self {
            actions,
            observations,
            rewards,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_rewards(&self) -> usize {
        self.rewards.len()
    }

    /// `|O| * |R|`.
    pub fn num_percepts(&self) -> usize {
        self.num_observations() * self.num_rewards()
    }

    /// `|A| * |O| * |R|`, the per-step branching of the interaction tree.
    pub fn branching(&self) -> usize {
        self.num_actions() * self.num_percepts()
    }
}
