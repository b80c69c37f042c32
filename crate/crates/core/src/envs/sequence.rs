//! Binary sequence prediction as a one-action environment.

use std::sync::Arc;

use crate::error::Result;
use crate::history::{Percept, Step};
use crate::models::{ModelClass, ModelState, Sparse, WorldModel};
use crate::spaces::{Alphabet, RewardSpace, Spaces};

/// Probability of emitting symbol `1` as a function of the past.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceKind {
    Bernoulli(f64),
    /// `before` for the first `at` symbols, `after` from then on.
    Switch { before: f64, after: f64, at: u64 },
    /// `base + amp / (t + 2)` for the `t`-th symbol (0-based).
    Decaying { base: f64, amp: f64 },
    /// Depends on the previous symbol; `first` for the opening symbol.
    Markov { first: f64, after_zero: f64, after_one: f64 },
}

#[derive(Debug, Clone)]
pub struct SequenceModel {
    name: String,
    spaces: Arc<Spaces>,
    kind: SequenceKind,
}

/// One action, observations `{0, 1}`, constant reward 1.
pub fn sequence_spaces() -> Arc<Spaces> {
    Spaces::new(
        Alphabet::new(["observe"]).expect("static labels"),
        Alphabet::new(["0", "1"]).expect("static labels"),
        RewardSpace::new([0.0, 1.0]).expect("static rewards"),
    )
}

impl SequenceModel {
    pub fn new(name: impl Into<String>, spaces: Arc<Spaces>, kind: SequenceKind) -> Self {
        Self {
            name: name.into(),
            spaces,
            kind,
        }
    }

    fn p_one(&self, state: &ModelState) -> f64 {
        match self.kind {
            SequenceKind::Bernoulli(p) => p,
            SequenceKind::Switch { before, after, at } => {
                if state[0] < at {
                    before
                } else {
                    after
                }
            }
            SequenceKind::Decaying { base, amp } => (base + amp / (state[0] as f64 + 2.0)).min(1.0),
            SequenceKind::Markov {
                first,
                after_zero,
                after_one,
            } => match state[0] {
                0 => after_zero,
                1 => after_one,
                _ => first,
            },
        }
    }
}

impl WorldModel for SequenceModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    fn initial_state(&self) -> ModelState {
        match self.kind {
            SequenceKind::Bernoulli(_) => ModelState::new(),
            SequenceKind::Markov { .. } => ModelState::from_slice(&[2]),
            _ => ModelState::from_slice(&[0]),
        }
    }

    fn advance(&self, state: &ModelState, step: &Step) -> ModelState {
        match self.kind {
            SequenceKind::Bernoulli(_) => state.clone(),
            SequenceKind::Switch { at, .. } => ModelState::from_slice(&[(state[0] + 1).min(at)]),
            SequenceKind::Decaying { .. } => ModelState::from_slice(&[state[0] + 1]),
            SequenceKind::Markov { .. } => ModelState::from_slice(&[step.observation as u64]),
        }
    }

    fn predict(&self, state: &ModelState, _action: usize) -> Sparse<Percept> {
        let p = self.p_one(state);
        [(Percept::new(0, 1), 1.0 - p), (Percept::new(1, 1), p)]
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .collect()
    }

    fn memoizable(&self) -> bool {
        !matches!(self.kind, SequenceKind::Decaying { .. })
    }
}

/// Five-model instance whose truth is Bernoulli(0.7), with rivals that are
/// wrong early, wrong forever, asymptotically right, or Markov.
pub fn sequence_instance() -> Result<(Arc<dyn WorldModel>, ModelClass<dyn WorldModel>)> {
    let sp = sequence_spaces();
    let m = |name: &str, kind| Arc::new(SequenceModel::new(name, Arc::clone(&sp), kind)) as Arc<dyn WorldModel>;
    let truth = m("bern-0.7", SequenceKind::Bernoulli(0.7));
    let class = ModelClass::uniform(vec![
        Arc::clone(&truth),
        m(
            "switch-at-50",
            SequenceKind::Switch {
                before: 0.5,
                after: 0.7,
                at: 50,
            },
        ),
        m("bern-0.6", SequenceKind::Bernoulli(0.6)),
        m("decaying", SequenceKind::Decaying { base: 0.7, amp: 0.3 }),
        m(
            "markov",
            SequenceKind::Markov {
                first: 0.7,
                after_zero: 0.5,
                after_one: 0.8,
            },
        ),
    ])?;
    Ok((truth, class))
}
