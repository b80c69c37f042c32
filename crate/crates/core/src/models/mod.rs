//! World-models, mentor-models, model classes and event predicates.
//!
//! Models are history-based, but expressed as a fold: each model starts from
//! [`WorldModel::initial_state`], folds every completed step into a compact
//! [`ModelState`], and predicts from that state. Any function of the history
//! can be written this way (in the worst case the state is an encoding of the
//! whole history). The fold makes belief updates O(1) per step and lets the
//! planner memoize on state for models that declare it safe.

mod class;
mod event;
mod tabular;

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::dist::Categorical;
use crate::history::{History, Percept, Step};
use crate::spaces::Spaces;

pub use class::{GeometricFamily, LazyFamily, ModelClass};
pub use event::{
    close_under_event, event_has_happened, wrap_event, ActionEquals, EventPredicate,
    EventWrappedModel,
};
pub use tabular::{FiniteMdp, TabularPolicy};

/// Sufficient statistic of the history for one model.
pub type ModelState = SmallVec<[u64; 3]>;

/// Sparse conditional distribution: only outcomes with positive probability.
pub type Sparse<T> = Vec<(T, f64)>;

/// Which kind of evidence a model class consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    World,
    Mentor,
}

/// A stochastic map from history and action to observation and reward.
///
/// Implementations must be pure: equal states give equal predictions.
pub trait WorldModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn spaces(&self) -> &Arc<Spaces>;

    fn initial_state(&self) -> ModelState;

    /// Folds one completed step into the state.
    fn advance(&self, state: &ModelState, step: &Step) -> ModelState;

    /// Outcomes with positive probability after taking `action` in `state`.
    fn predict(&self, state: &ModelState, action: usize) -> Sparse<Percept>;

    /// True when equal states imply identical futures for every action
    /// sequence, so planners may cache subtree values by state.
    fn memoizable(&self) -> bool {
        false
    }

    fn state_after(&self, history: &History) -> ModelState {
        history
            .steps()
            .iter()
            .fold(self.initial_state(), |s, step| self.advance(&s, step))
    }

    /// Dense conditional over the full `O x R` grid in row-major order.
    fn conditional(&self, history: &History, action: usize) -> Categorical<Percept> {
        let spaces = self.spaces();
        let nr = spaces.num_rewards();
        let mut probs = vec![0.0; spaces.num_percepts()];
        for (p, w) in self.predict(&self.state_after(history), action) {
            probs[p.index(nr)] += w;
        }
        let support = (0..probs.len()).map(|i| Percept::from_index(i, nr)).collect();
        Categorical::new(support, probs).expect("world model emitted an invalid distribution")
    }
}

/// A stochastic policy, used both for the true mentor and for mentor hypotheses.
pub trait MentorModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn num_actions(&self) -> usize;

    fn initial_state(&self) -> ModelState;

    fn advance(&self, state: &ModelState, step: &Step) -> ModelState;

    /// Dense action distribution.
    fn action_probs(&self, state: &ModelState) -> Vec<f64>;

    fn memoizable(&self) -> bool {
        false
    }

    fn state_after(&self, history: &History) -> ModelState {
        history
            .steps()
            .iter()
            .fold(self.initial_state(), |s, step| self.advance(&s, step))
    }

    fn policy(&self, history: &History) -> Categorical<usize> {
        let probs = self.action_probs(&self.state_after(history));
        Categorical::new((0..probs.len()).collect(), probs)
            .expect("mentor model emitted an invalid distribution")
    }
}

/// Common interface the belief engine needs from either model kind.
pub trait Hypothesis: Send + Sync {
    const KIND: ModelKind;

    fn label(&self) -> &str;

    fn start(&self) -> ModelState;

    fn fold(&self, state: &ModelState, step: &Step) -> ModelState;

    /// Likelihood of `step` from `state`, or `None` when the step carries no
    /// evidence about this kind of model.
    fn evidence(&self, state: &ModelState, step: &Step) -> Option<f64>;
}

impl Hypothesis for dyn WorldModel {
    const KIND: ModelKind = ModelKind::World;

    fn label(&self) -> &str {
        self.name()
    }

    fn start(&self) -> ModelState {
        self.initial_state()
    }

    fn fold(&self, state: &ModelState, step: &Step) -> ModelState {
        self.advance(state, step)
    }

    fn evidence(&self, state: &ModelState, step: &Step) -> Option<f64> {
        let target = step.percept();
        Some(
            self.predict(state, step.action)
                .into_iter()
                .filter(|(p, _)| *p == target)
                .map(|(_, w)| w)
                .sum(),
        )
    }
}

impl Hypothesis for dyn MentorModel {
    const KIND: ModelKind = ModelKind::Mentor;

    fn label(&self) -> &str {
        self.name()
    }

    fn start(&self) -> ModelState {
        self.initial_state()
    }

    fn fold(&self, state: &ModelState, step: &Step) -> ModelState {
        self.advance(state, step)
    }

    fn evidence(&self, state: &ModelState, step: &Step) -> Option<f64> {
        step.queried
            .then(|| self.action_probs(state)[step.action])
    }
}

/// A world-model whose prediction is a fixed function of the action alone.
#[derive(Debug, Clone)]
pub struct ActionRewardModel {
    name: String,
    spaces: Arc<Spaces>,
    per_action: Vec<Sparse<Percept>>,
}

impl ActionRewardModel {
    /// `per_action[a]` lists `(percept, prob)` pairs; each row must sum to 1.
    pub fn new(
        name: impl Into<String>,
        spaces: Arc<Spaces>,
        per_action: Vec<Sparse<Percept>>,
    ) -> crate::Result<Self> {
        if per_action.len() != spaces.num_actions() {
            return Err(crate::Error::InvalidConfig(
                "one outcome row per action required".into(),
            ));
        }
        for (a, row) in per_action.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, w)| w).sum();
            if (sum - 1.0).abs() > crate::dist::PROB_TOLERANCE
                || row.iter().any(|(p, w)| {
                    *w < 0.0
                        || p.observation >= spaces.num_observations()
                        || p.reward >= spaces.num_rewards()
                })
            {
                return Err(crate::Error::InvalidTransitionRow {
                    state: 0,
                    action: a,
                    sum,
                });
            }
        }
        let per_action = per_action
            .into_iter()
            .map(|row| row.into_iter().filter(|(_, w)| *w > 0.0).collect())
            .collect();
        Ok(Self {
            name: name.into(),
            spaces,
            per_action,
        })
    }
}

impl WorldModel for ActionRewardModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    fn initial_state(&self) -> ModelState {
        ModelState::new()
    }

    fn advance(&self, state: &ModelState, _step: &Step) -> ModelState {
        state.clone()
    }

    fn predict(&self, _state: &ModelState, action: usize) -> Sparse<Percept> {
        self.per_action[action].clone()
    }

    fn memoizable(&self) -> bool {
        true
    }
}

/// A policy with a fixed action distribution, independent of history.
#[derive(Debug, Clone)]
pub struct StationaryPolicy {
    name: String,
    probs: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(name: impl Into<String>, probs: Vec<f64>) -> crate::Result<Self> {
        Categorical::new((0..probs.len()).collect(), probs.clone())?;
        Ok(Self {
            name: name.into(),
            probs,
        })
    }

    pub fn uniform(name: impl Into<String>, num_actions: usize) -> Self {
        Self {
            name: name.into(),
            probs: vec![1.0 / num_actions as f64; num_actions],
        }
    }
}

impl MentorModel for StationaryPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        self.probs.len()
    }

    fn initial_state(&self) -> ModelState {
        ModelState::new()
    }

    fn advance(&self, state: &ModelState, _step: &Step) -> ModelState {
        state.clone()
    }

    fn action_probs(&self, _state: &ModelState) -> Vec<f64> {
        self.probs.clone()
    }

    fn memoizable(&self) -> bool {
        true
    }
}
