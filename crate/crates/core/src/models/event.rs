use std::fmt;
use std::sync::Arc;

use super::{ModelClass, ModelState, Sparse, WorldModel};
use crate::error::{Error, Result};
use crate::history::{History, Percept, Step};
use crate::spaces::Spaces;

/// A decidable set of `(history, pending action)` prefixes.
///
/// Like models, predicates fold the history into a state; `fires` must depend
/// only on that state and the pending action.
pub trait EventPredicate: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn initial_state(&self) -> ModelState;

    fn advance(&self, state: &ModelState, step: &Step) -> ModelState;

    /// Whether the prefix summarized by `state`, followed by `action`, is in the event.
    fn fires(&self, state: &ModelState, action: usize) -> bool;

    fn memoizable(&self) -> bool {
        false
    }

    /// Evaluates the predicate on a history with a pending action. Without a
    /// pending action nothing can fire.
    fn test(&self, history: &History) -> bool {
        let Some(action) = history.pending_action() else {
            return false;
        };
        let state = history
            .steps()
            .iter()
            .fold(self.initial_state(), |s, step| self.advance(&s, step));
        self.fires(&state, action)
    }
}

/// True iff the event fired at some prefix `h_{<t'} a_{t'}` with `t' <= t`.
pub fn event_has_happened(event: &dyn EventPredicate, history: &History) -> bool {
    let mut state = event.initial_state();
    for step in history.steps() {
        if event.fires(&state, step.action) {
            return true;
        }
        state = event.advance(&state, step);
    }
    history
        .pending_action()
        .is_some_and(|a| event.fires(&state, a))
}

/// Fires whenever the pending action is `action`.
#[derive(Debug, Clone)]
pub struct ActionEquals {
    name: String,
    action: usize,
}

impl ActionEquals {
    pub fn new(name: impl Into<String>, action: usize) -> Self {
        Self {
            name: name.into(),
            action,
        }
    }
}

impl EventPredicate for ActionEquals {
    fn name(&self) -> &str {
        &self.name
    }

    fn initial_state(&self) -> ModelState {
        ModelState::new()
    }

    fn advance(&self, state: &ModelState, _step: &Step) -> ModelState {
        state.clone()
    }

    fn fires(&self, _state: &ModelState, action: usize) -> bool {
        action == self.action
    }

    fn memoizable(&self) -> bool {
        true
    }
}

/// Copy of `base` until the event happens; afterwards every reward is 0 and the
/// observation marginal is the base model's.
///
/// State layout: `[happened, base_len, base.., event..]`.
#[derive(Debug)]
pub struct EventWrappedModel {
    name: String,
    base: Arc<dyn WorldModel>,
    event: Arc<dyn EventPredicate>,
}

impl EventWrappedModel {
    pub fn base(&self) -> &Arc<dyn WorldModel> {
        &self.base
    }

    pub fn event(&self) -> &Arc<dyn EventPredicate> {
        &self.event
    }

    fn split<'a>(&self, state: &'a ModelState) -> (bool, &'a [u64], &'a [u64]) {
        let happened = state[0] != 0;
        let n = state[1] as usize;
        (happened, &state[2..2 + n], &state[2 + n..])
    }

    fn join(happened: bool, base: &[u64], event: &[u64]) -> ModelState {
        let mut s = ModelState::with_capacity(2 + base.len() + event.len());
        s.push(happened as u64);
        s.push(base.len() as u64);
        s.extend_from_slice(base);
        s.extend_from_slice(event);
        s
    }
}

pub fn wrap_event(base: Arc<dyn WorldModel>, event: Arc<dyn EventPredicate>) -> EventWrappedModel {
    EventWrappedModel {
        name: format!("{}|zero-after:{}", base.name(), event.name()),
        base,
        event,
    }
}

impl WorldModel for EventWrappedModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn spaces(&self) -> &Arc<Spaces> {
        self.base.spaces()
    }

    fn initial_state(&self) -> ModelState {
        Self::join(
            false,
            &self.base.initial_state(),
            &self.event.initial_state(),
        )
    }

    fn advance(&self, state: &ModelState, step: &Step) -> ModelState {
        let (happened, base, event) = self.split(state);
        let base_s = ModelState::from_slice(base);
        let event_s = ModelState::from_slice(event);
        let happened = happened || self.event.fires(&event_s, step.action);
        Self::join(
            happened,
            &self.base.advance(&base_s, step),
            &self.event.advance(&event_s, step),
        )
    }

    fn predict(&self, state: &ModelState, action: usize) -> Sparse<Percept> {
        let (happened, base, event) = self.split(state);
        let base_pred = self.base.predict(&ModelState::from_slice(base), action);
        if !(happened || self.event.fires(&ModelState::from_slice(event), action)) {
            return base_pred;
        }
        // Reward index 0 is the value 0 in every reward space.
        let mut out: Sparse<Percept> = Vec::with_capacity(base_pred.len());
        for (p, w) in base_pred {
            let zeroed = Percept::new(p.observation, 0);
            match out.iter_mut().find(|(q, _)| *q == zeroed) {
                Some((_, acc)) => *acc += w,
                None => out.push((zeroed, w)),
            }
        }
        out
    }

    fn memoizable(&self) -> bool {
        self.base.memoizable() && self.event.memoizable()
    }
}

/// Splits each prior weight evenly between a model and its event-wrapped copy,
/// so `w(nu_E) / w(nu) = 1` for every base model.
pub fn close_under_event(
    class: &ModelClass<dyn WorldModel>,
    event: Arc<dyn EventPredicate>,
) -> Result<ModelClass<dyn WorldModel>> {
    if !class.is_finite() {
        return Err(Error::LazyClassUnsupported);
    }
    let mut entries: Vec<(Arc<dyn WorldModel>, f64)> = Vec::new();
    for (m, w) in class.entries()? {
        let wrapped: Arc<dyn WorldModel> = Arc::new(wrap_event(Arc::clone(&m), Arc::clone(&event)));
        entries.push((m, w / 2.0));
        entries.push((wrapped, w / 2.0));
    }
    ModelClass::finite(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ActionRewardModel, GeometricFamily};
    use crate::spaces::{Alphabet, RewardSpace};

    const SAFE: usize = 0;
    const DANGER: usize = 1;

    fn spaces() -> Arc<Spaces> {
        Spaces::new(
            Alphabet::new(["safe", "danger"]).unwrap(),
            Alphabet::new(["o0", "o1"]).unwrap(),
            RewardSpace::new([0.0, 0.5, 1.0]).unwrap(),
        )
    }

    fn base() -> Arc<dyn WorldModel> {
        let row = vec![
            (Percept::new(0, 2), 0.2),
            (Percept::new(0, 1), 0.1),
            (Percept::new(1, 2), 0.7),
        ];
        Arc::new(ActionRewardModel::new("base", spaces(), vec![row.clone(), row]).unwrap())
    }

    fn danger() -> Arc<dyn EventPredicate> {
        Arc::new(ActionEquals::new("danger", DANGER))
    }

    fn hist(actions: &[usize]) -> History {
        History::from_steps(
            actions
                .iter()
                .map(|&a| Step::new(a, Percept::new(0, 2), false))
                .collect(),
        )
    }

    #[test]
    fn has_happened_examples() {
        let e = danger();
        assert!(!event_has_happened(e.as_ref(), &History::new().with_pending(SAFE)));
        let actions = [SAFE, SAFE, DANGER, SAFE, SAFE, SAFE, SAFE];
        // Linear scan over prefixes: fires exactly at index 2.
        for t in 0..actions.len() {
            let h = hist(&actions[..t]).with_pending(actions[t]);
            let oracle = actions[..=t].contains(&DANGER);
            assert_eq!(event_has_happened(e.as_ref(), &h), oracle, "t={t}");
        }
        assert!(event_has_happened(
            e.as_ref(),
            &hist(&actions[..6]).with_pending(SAFE)
        ));
    }

    #[test]
    fn wrapper_mimics_base_before_event() {
        let w = wrap_event(base(), danger());
        let h = hist(&[SAFE, SAFE]);
        assert_eq!(w.conditional(&h, SAFE), base().conditional(&h, SAFE));
    }

    #[test]
    fn wrapper_zeroes_reward_and_keeps_observations_after_event() {
        let w = wrap_event(base(), danger());
        for h in [hist(&[SAFE, DANGER]), hist(&[SAFE])] {
            let action = if h.len() == 2 { SAFE } else { DANGER };
            let c = w.conditional(&h, action);
            let zero_mass: f64 = c.iter().filter(|(p, _)| p.reward == 0).map(|(_, w)| w).sum();
            assert!((zero_mass - 1.0).abs() < 1e-12);
            let obs: Vec<f64> = (0..2)
                .map(|o| c.iter().filter(|(p, _)| p.observation == o).map(|(_, w)| w).sum())
                .collect();
            assert!((obs[0] - 0.3).abs() < 1e-12 && (obs[1] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn closure_splits_and_sorts() {
        let single = ModelClass::finite(vec![(base(), 1.0)]).unwrap();
        let closed = close_under_event(&single, danger()).unwrap();
        let e = closed.entries().unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].1, 0.5);
        assert_eq!(e[1].1, 0.5);
        assert_eq!(e[0].0.name(), "base");

        let three = ModelClass::finite(vec![
            (base(), 0.5),
            (base(), 0.3),
            (base(), 0.2),
        ])
        .unwrap();
        let closed = close_under_event(&three, danger()).unwrap();
        let e = closed.entries().unwrap();
        assert_eq!(e.len(), 6);
        assert!((e.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(e.windows(2).all(|p| p[0].1 >= p[1].1));
    }

    #[test]
    fn double_wrap_is_idempotent_in_distribution() {
        let once: Arc<dyn WorldModel> = Arc::new(wrap_event(base(), danger()));
        let twice = wrap_event(Arc::clone(&once), danger());
        for actions in [&[SAFE, SAFE][..], &[SAFE, DANGER], &[DANGER]] {
            let h = hist(actions);
            for a in [SAFE, DANGER] {
                assert_eq!(once.conditional(&h, a), twice.conditional(&h, a));
            }
        }
    }

    #[test]
    fn closure_rejects_lazy() {
        let fam = GeometricFamily::new(|_| base());
        let lazy = ModelClass::<dyn WorldModel>::lazy(Arc::new(fam));
        assert_eq!(
            close_under_event(&lazy, danger()).err(),
            Some(Error::LazyClassUnsupported)
        );
    }
}
