//! Interaction histories.

use serde::{Deserialize, Serialize};

/// Observation and reward produced by the environment for one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Percept {
    pub observation: usize,
    pub reward: usize,
}

impl Percept {
    pub fn new(observation: usize, reward: usize) -> Self {
        Self {
            observation,
            reward,
        }
    }

    /// Row-major index into the `O x R` grid.
    pub fn index(&self, num_rewards: usize) -> usize {
        self.observation * num_rewards + self.reward
    }

    pub fn from_index(index: usize, num_rewards: usize) -> Self {
        Self::new(index / num_rewards, index % num_rewards)
    }
}

/// One completed timestep. All fields are indices into the environment's spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub action: usize,
    pub observation: usize,
    pub reward: usize,
    /// Whether the mentor chose `action`.
    pub queried: bool,
}

impl Step {
    pub fn new(action: usize, percept: Percept, queried: bool) -> Self {
        Self {
            action,
            observation: percept.observation,
            reward: percept.reward,
            queried,
        }
    }

    pub fn percept(&self) -> Percept {
        Percept::new(self.observation, self.reward)
    }
}

/// Append-only sequence of completed steps, optionally followed by a pending action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    steps: Vec<Step>,
    pending_action: Option<usize>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_steps(steps: Vec<Step>) -> Self {
        Self {
            steps,
            pending_action: None,
        }
    }

    /// Number of completed timesteps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn last(&self) -> Option<&Step> {
        self.steps.last()
    }

    pub fn pending_action(&self) -> Option<usize> {
        self.pending_action
    }

    /// Appends a completed step, clearing any pending action.
    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
        self.pending_action = None;
    }

    pub fn with_pending(mut self, action: usize) -> Self {
        self.pending_action = Some(action);
        self
    }

    pub fn set_pending(&mut self, action: Option<usize>) {
        self.pending_action = action;
    }

    /// The prefix of the first `len` steps, without a pending action.
    pub fn prefix(&self, len: usize) -> History {
        History::from_steps(self.steps[..len].to_vec())
    }
}
