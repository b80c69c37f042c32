//! True environments, mentors and scenario bundles.

mod coinflip;
mod gridworld;
mod mentors;
mod scenario_file;
mod sequence;

use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::dist::sample_index;
use crate::error::{Error, Result};
use crate::history::{Percept, Step};
use crate::models::{EventPredicate, MentorModel, ModelClass, ModelState, WorldModel};
use crate::spaces::Spaces;

pub use coinflip::{coinflip_scenario, coinflip_singleton_scenario, coinflip_with_mentor, HEADS, TAILS};
pub use gridworld::{
    catastrophe_gridworld, safe_mentor, GridLayout, GridworldOptions, MoveOnto, DEFAULT_LAYOUT,
};
pub use mentors::{suboptimal_mentor, Flaw, FlawedMentor};
pub use scenario_file::{mdp_scenario, parse_scenario, ScenarioFile, SCENARIO_FORMAT};
pub use sequence::{sequence_instance, sequence_spaces, SequenceKind, SequenceModel};

/// The true environment `mu`, sampled step by step.
#[derive(Debug, Clone)]
pub struct Environment {
    truth: Arc<dyn WorldModel>,
    reward_floor: f64,
    state: ModelState,
}

impl Environment {
    /// `reward_floor` must lie in `(0, 1]`.
    pub fn new(truth: Arc<dyn WorldModel>, reward_floor: f64) -> Result<Self> {
        if !(reward_floor > 0.0 && reward_floor <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "reward floor {reward_floor} not in (0, 1]"
            )));
        }
        let state = truth.initial_state();
        Ok(Self {
            truth,
            reward_floor,
            state,
        })
    }

    pub fn truth(&self) -> &Arc<dyn WorldModel> {
        &self.truth
    }

    pub fn spaces(&self) -> &Arc<Spaces> {
        self.truth.spaces()
    }

    pub fn reward_floor(&self) -> f64 {
        self.reward_floor
    }

    /// Back to the empty history.
    pub fn reset(&mut self) {
        self.state = self.truth.initial_state();
    }

    /// Samples the percept for `action` at the current history. Fails if the
    /// truth emits a reward below the floor.
    pub fn sample<R: Rng + ?Sized>(&self, action: usize, rng: &mut R) -> Result<Percept> {
        if action >= self.spaces().num_actions() {
            return Err(Error::InvalidConfig(format!("action {action} out of range")));
        }
        let pred = self.truth.predict(&self.state, action);
        let probs: Vec<f64> = pred.iter().map(|(_, w)| *w).collect();
        let percept = pred[sample_index(&probs, rng)].0;
        let r = self.spaces().rewards.value(percept.reward);
        if r < self.reward_floor - 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "true environment emitted reward {r} below floor {}",
                self.reward_floor
            )));
        }
        Ok(percept)
    }

    pub fn advance(&mut self, step: &Step) {
        self.state = self.truth.advance(&self.state, step);
    }
}

/// Everything an episode needs: truth, mentor and both hypothesis classes.
#[derive(Clone)]
pub struct ScenarioBundle {
    pub name: String,
    pub environment: Environment,
    pub mentor: Arc<dyn MentorModel>,
    pub world_class: ModelClass<dyn WorldModel>,
    pub mentor_class: ModelClass<dyn MentorModel>,
    /// Event whose closure was applied to `world_class`, if any.
    pub event: Option<Arc<dyn EventPredicate>>,
    /// Action whose frequency the harness reports (heads in the coin-flip).
    pub focus_action: Option<usize>,
}

impl std::fmt::Debug for ScenarioBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioBundle")
            .field("name", &self.name)
            .field("truth", &self.environment.truth().name())
            .field("mentor", &self.mentor.name())
            .field("world_class", &self.world_class)
            .field("mentor_class", &self.mentor_class)
            .finish()
    }
}

impl ScenarioBundle {
    /// Checks that the truth and mentor are members (by name) of their
    /// classes with positive prior, and that all models share the spaces.
    pub fn new(
        name: impl Into<String>,
        environment: Environment,
        mentor: Arc<dyn MentorModel>,
        world_class: ModelClass<dyn WorldModel>,
        mentor_class: ModelClass<dyn MentorModel>,
    ) -> Result<Self> {
        world_class.check_unique_names()?;
        mentor_class.check_unique_names()?;
        let truth = environment.truth().name();
        match world_class.prior_of(truth) {
            Some(w) if w > 0.0 => {}
            _ => return Err(Error::Unrealizable(format!("truth `{truth}` not in world class"))),
        }
        match mentor_class.prior_of(mentor.name()) {
            Some(w) if w > 0.0 => {}
            _ => {
                return Err(Error::Unrealizable(format!(
                    "mentor `{}` not in mentor class",
                    mentor.name()
                )))
            }
        }
        let spaces = environment.spaces();
        for (m, _) in world_class.entries()? {
            if m.spaces() != spaces {
                return Err(Error::InvalidClass(format!(
                    "model `{}` uses different spaces",
                    m.name()
                )));
            }
        }
        for (m, _) in mentor_class.entries()? {
            if m.num_actions() != spaces.num_actions() {
                return Err(Error::InvalidClass(format!(
                    "mentor model `{}` has the wrong number of actions",
                    m.name()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            environment,
            mentor,
            world_class,
            mentor_class,
            event: None,
            focus_action: None,
        })
    }

    pub fn with_event(mut self, event: Arc<dyn EventPredicate>) -> Self {
        self.event = Some(event);
        self
    }

    pub fn with_focus_action(mut self, action: usize) -> Self {
        self.focus_action = Some(action);
        self
    }

    pub fn spaces(&self) -> &Arc<Spaces> {
        self.environment.spaces()
    }

    /// Prior weight of the true environment.
    pub fn truth_prior(&self) -> f64 {
        self.world_class
            .prior_of(self.environment.truth().name())
            .unwrap_or(0.0)
    }
}

/// Names accepted by [`load_scenario`] besides file paths.
pub const BUILTIN_SCENARIOS: [&str; 4] = [
    "coinflip",
    "coinflip-singleton",
    "coinflip-biased-mentor",
    "gridworld",
];

/// A built-in scenario by name, or a scenario file by path.
pub fn load_scenario(id: &str) -> Result<ScenarioBundle> {
    match id {
        "coinflip" => coinflip_scenario(),
        "coinflip-singleton" => coinflip_singleton_scenario(),
        "coinflip-biased-mentor" => {
            let fair = coinflip_scenario()?.mentor;
            let biased = suboptimal_mentor(
                fair,
                Flaw::Bias {
                    action: TAILS,
                    prob: 0.9,
                },
            )?;
            coinflip_with_mentor(Arc::new(biased.renamed("tails-0.9")))
        }
        "gridworld" => catastrophe_gridworld(&GridLayout::parse(DEFAULT_LAYOUT)?, &GridworldOptions::default()),
        path if Path::new(path).is_file() => {
            let text = std::fs::read_to_string(path)?;
            mdp_scenario(&text)
        }
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}
