use std::sync::Arc;

use super::{MentorModel, ModelState, Sparse, WorldModel};
use crate::dist::PROB_TOLERANCE;
use crate::error::{Error, Result};
use crate::history::{Percept, Step};
use crate::spaces::Spaces;

/// A finite MDP embedded as a history-based world-model: the observation is
/// the next state, and predictions depend only on the state decoded from the
/// last observation (the initial state before any step).
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    name: String,
    spaces: Arc<Spaces>,
    /// `transitions[s][a][s']`.
    transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][a][s']`, indices into the reward space.
    rewards: Vec<Vec<Vec<usize>>>,
    initial: usize,
}

impl FiniteMdp {
    /// `spaces.observations` must be the state labels.
    pub fn new(
        name: impl Into<String>,
        spaces: Arc<Spaces>,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<Vec<usize>>>,
        initial: usize,
    ) -> Result<Self> {
        let ns = spaces.num_observations();
        let na = spaces.num_actions();
        if transitions.len() != ns || rewards.len() != ns || initial >= ns {
            return Err(Error::InvalidConfig(
                "tables must have one row per state and a valid initial state".into(),
            ));
        }
        for s in 0..ns {
            if transitions[s].len() != na || rewards[s].len() != na {
                return Err(Error::InvalidConfig(format!(
                    "state {s} needs one row per action"
                )));
            }
            for a in 0..na {
                let row = &transitions[s][a];
                let sum: f64 = row.iter().sum();
                if row.len() != ns
                    || row.iter().any(|p| !p.is_finite() || *p < 0.0)
                    || (sum - 1.0).abs() > PROB_TOLERANCE
                {
                    return Err(Error::InvalidTransitionRow {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                if rewards[s][a].len() != ns
                    || rewards[s][a].iter().any(|r| *r >= spaces.num_rewards())
                {
                    return Err(Error::InvalidConfig(format!(
                        "reward row for state {s}, action {a} is invalid"
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            spaces,
            transitions,
            rewards,
            initial,
        })
    }

    /// Rewards depend on `(state, action)` only.
    pub fn with_state_action_rewards(
        name: impl Into<String>,
        spaces: Arc<Spaces>,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<usize>>,
        initial: usize,
    ) -> Result<Self> {
        let ns = spaces.num_observations();
        let rewards = rewards
            .into_iter()
            .map(|row| row.into_iter().map(|r| vec![r; ns]).collect())
            .collect();
        Self::new(name, spaces, transitions, rewards, initial)
    }

    /// Rewards are paid on arrival in the next state.
    pub fn with_arrival_rewards(
        name: impl Into<String>,
        spaces: Arc<Spaces>,
        transitions: Vec<Vec<Vec<f64>>>,
        arrival: Vec<usize>,
        initial: usize,
    ) -> Result<Self> {
        let ns = spaces.num_observations();
        let na = spaces.num_actions();
        let rewards = vec![vec![arrival.clone(); na]; ns];
        Self::new(name, spaces, transitions, rewards, initial)
    }

    pub fn transitions(&self) -> &[Vec<Vec<f64>>] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[Vec<Vec<usize>>] {
        &self.rewards
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }
}

impl WorldModel for FiniteMdp {
    fn name(&self) -> &str {
        &self.name
    }

    fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    fn initial_state(&self) -> ModelState {
        ModelState::from_slice(&[self.initial as u64])
    }

    fn advance(&self, _state: &ModelState, step: &Step) -> ModelState {
        ModelState::from_slice(&[step.observation as u64])
    }

    fn predict(&self, state: &ModelState, action: usize) -> Sparse<Percept> {
        let s = state[0] as usize;
        self.transitions[s][action]
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(next, p)| (Percept::new(next, self.rewards[s][action][next]), *p))
            .collect()
    }

    fn memoizable(&self) -> bool {
        true
    }
}

/// A state-feedback policy over a [`FiniteMdp`]'s states.
#[derive(Debug, Clone)]
pub struct TabularPolicy {
    name: String,
    /// `probs[s][a]`.
    probs: Vec<Vec<f64>>,
    initial: usize,
}

impl TabularPolicy {
    pub fn new(name: impl Into<String>, probs: Vec<Vec<f64>>, initial: usize) -> Result<Self> {
        if probs.is_empty() || initial >= probs.len() {
            return Err(Error::InvalidConfig("policy table is empty".into()));
        }
        let na = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != na
                || row.iter().any(|p| !p.is_finite() || *p < 0.0)
                || (sum - 1.0).abs() > PROB_TOLERANCE
            {
                return Err(Error::InvalidTransitionRow {
                    state: s,
                    action: 0,
                    sum,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            probs,
            initial,
        })
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

impl MentorModel for TabularPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    fn initial_state(&self) -> ModelState {
        ModelState::from_slice(&[self.initial as u64])
    }

    fn advance(&self, _state: &ModelState, step: &Step) -> ModelState {
        ModelState::from_slice(&[step.observation as u64])
    }

    fn action_probs(&self, state: &ModelState) -> Vec<f64> {
        self.probs[state[0] as usize].clone()
    }

    fn memoizable(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::History;
    use crate::rng::{RngStreams, Stream};
    use crate::spaces::{Alphabet, RewardSpace};
    use rand::Rng;

    fn spaces(states: &[&str], actions: &[&str]) -> Arc<Spaces> {
        Spaces::new(
            Alphabet::new(actions.iter().copied()).unwrap(),
            Alphabet::new(states.iter().copied()).unwrap(),
            RewardSpace::new([0.0, 0.5, 1.0]).unwrap(),
        )
    }

    #[test]
    fn one_state_chain_is_a_point_mass() {
        let sp = spaces(&["s0"], &["stay"]);
        let m = FiniteMdp::with_state_action_rewards("m", sp, vec![vec![vec![1.0]]], vec![vec![2]], 0)
            .unwrap();
        let mut h = History::new();
        for _ in 0..10 {
            let c = m.conditional(&h, 0);
            assert_eq!(c.probs(), &[0.0, 0.0, 1.0]);
            h.push(Step::new(0, Percept::new(0, 2), false));
        }
    }

    #[test]
    fn deterministic_cycle_matches_unrolled_chain() {
        let sp = spaces(&["s0", "s1"], &["go"]);
        let m = FiniteMdp::with_arrival_rewards(
            "cycle",
            sp,
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![1, 2],
            0,
        )
        .unwrap();
        // Unroll the chain directly: state alternates 0,1,0,1...
        let mut h = History::new();
        let mut s = 0usize;
        for _ in 0..8 {
            let next = 1 - s;
            let reward = if next == 0 { 1 } else { 2 };
            let c = m.conditional(&h, 0);
            assert_eq!(c.prob_of(&Percept::new(next, reward)), 1.0);
            h.push(Step::new(0, Percept::new(next, reward), false));
            s = next;
        }
    }

    #[test]
    fn conditional_ignores_history_before_last_observation() {
        let sp = spaces(&["s0", "s1"], &["a", "b"]);
        let row = vec![0.9, 0.1];
        let m = FiniteMdp::with_state_action_rewards(
            "m",
            sp,
            vec![vec![row.clone(), row.clone()], vec![row.clone(), row]],
            vec![vec![1, 2], vec![0, 1]],
            0,
        )
        .unwrap();
        let mut rng = RngStreams::new(9).stream(Stream::Agent);
        for _ in 0..50 {
            let len = rng.gen_range(0..10);
            let mut h = History::new();
            for _ in 0..len {
                h.push(Step::new(
                    rng.gen_range(0..2),
                    Percept::new(rng.gen_range(0..2), rng.gen_range(0..3)),
                    rng.gen(),
                ));
            }
            h.push(Step::new(0, Percept::new(1, 0), false));
            let c = m.conditional(&h, 1);
            assert!((c.prob_of(&Percept::new(0, 1)) - 0.9).abs() < 1e-12);
            assert!((c.prob_of(&Percept::new(1, 1)) - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_row_rejected() {
        let sp = spaces(&["s0", "s1"], &["a"]);
        let r = FiniteMdp::with_state_action_rewards(
            "m",
            sp,
            vec![vec![vec![0.5, 0.4]], vec![vec![0.0, 1.0]]],
            vec![vec![0], vec![0]],
            0,
        );
        assert!(matches!(
            r,
            Err(Error::InvalidTransitionRow { state: 0, action: 0, .. })
        ));
    }
}
