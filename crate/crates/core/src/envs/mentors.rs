use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::Step;
use crate::models::{MentorModel, ModelState};

/// A deliberate imperfection added to a mentor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flaw {
    /// With probability `epsilon`, act uniformly at random.
    Noise { epsilon: f64 },
    /// Play `action` with probability `prob`; the remaining mass follows the
    /// base mentor's preferences among the other actions (uniform if it has none).
    Bias { action: usize, prob: f64 },
}

#[derive(Debug, Clone)]
pub struct FlawedMentor {
    name: String,
    base: Arc<dyn MentorModel>,
    flaw: Flaw,
}

impl FlawedMentor {
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn flaw(&self) -> Flaw {
        self.flaw
    }
}

pub fn suboptimal_mentor(base: Arc<dyn MentorModel>, flaw: Flaw) -> Result<FlawedMentor> {
    let n = base.num_actions();
    let name = match flaw {
        Flaw::Noise { epsilon } => {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::InvalidConfig(format!("noise {epsilon} not in [0, 1]")));
            }
            format!("{}+noise{epsilon}", base.name())
        }
        Flaw::Bias { action, prob } => {
            if action >= n || !(0.0..=1.0).contains(&prob) || n < 2 {
                return Err(Error::InvalidConfig("invalid bias flaw".into()));
            }
            format!("{}+bias{action}:{prob}", base.name())
        }
    };
    Ok(FlawedMentor { name, base, flaw })
}

impl MentorModel for FlawedMentor {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        self.base.num_actions()
    }

    fn initial_state(&self) -> ModelState {
        self.base.initial_state()
    }

    fn advance(&self, state: &ModelState, step: &Step) -> ModelState {
        self.base.advance(state, step)
    }

    fn action_probs(&self, state: &ModelState) -> Vec<f64> {
        let base = self.base.action_probs(state);
        let n = base.len() as f64;
        match self.flaw {
            Flaw::Noise { epsilon } => base
                .iter()
                .map(|p| (1.0 - epsilon) * p + epsilon / n)
                .collect(),
            Flaw::Bias { action, prob } => {
                let rest: f64 = base
                    .iter()
                    .enumerate()
                    .filter(|(a, _)| *a != action)
                    .map(|(_, p)| p)
                    .sum();
                base.iter()
                    .enumerate()
                    .map(|(a, p)| {
                        if a == action {
                            prob
                        } else if rest > 0.0 {
                            (1.0 - prob) * p / rest
                        } else {
                            (1.0 - prob) / (n - 1.0)
                        }
                    })
                    .collect()
            }
        }
    }

    fn memoizable(&self) -> bool {
        self.base.memoizable()
    }
}
