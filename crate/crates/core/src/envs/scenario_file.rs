//! JSON scenario files.
//!
//! Every file starts with `"format": "pessimist-scenario"`, `"version": 1`
//! and a `"kind"` of `"mdp"` or `"gridworld"`. The header is read first; the
//! body is then parsed strictly so diagnostics point at the offending line.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gridworld::{catastrophe_gridworld, GridLayout, GridworldOptions};
use super::{Environment, ScenarioBundle};
use crate::error::{Error, Result};
use crate::models::{FiniteMdp, MentorModel, ModelClass, TabularPolicy, WorldModel};
use crate::spaces::{Alphabet, RewardSpace, Spaces, DEFAULT_REWARDS};

pub const SCENARIO_FORMAT: &str = "pessimist-scenario";
const VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
}

/// A tabular MDP with a state-feedback mentor and perturbed rival models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub format: String,
    pub version: u32,
    pub kind: String,
    #[serde(default = "default_name")]
    pub name: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    #[serde(default = "default_rewards")]
    pub rewards: Vec<f64>,
    pub initial: String,
    pub reward_floor: f64,
    /// `transitions[s][a][s']`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `reward_values[s][a]`, each a member of `rewards`.
    pub reward_values: Vec<Vec<f64>>,
    /// `mentor[s][a]`.
    pub mentor: Vec<Vec<f64>>,
    /// Each level `d` adds the rival `(1 - d) T + d U` with `U` uniform over states.
    #[serde(default)]
    pub perturbations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub format: String,
    pub version: u32,
    pub kind: String,
    /// One string per row.
    pub layout: Vec<String>,
    #[serde(default = "default_slip")]
    pub slip: f64,
}

fn default_name() -> String {
    "mdp".into()
}

fn default_rewards() -> Vec<f64> {
    DEFAULT_REWARDS.to_vec()
}

fn default_slip() -> f64 {
    GridworldOptions::default().slip
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioFile {
    Mdp(MdpSpec),
    Gridworld(GridSpec),
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let header: Header = serde_json::from_str(text)?;
    if header.format != SCENARIO_FORMAT || header.version != VERSION {
        return Err(Error::SpecParse {
            line: 1,
            column: 1,
            message: format!(
                "expected format `{SCENARIO_FORMAT}` version {VERSION}, got `{}` version {}",
                header.format, header.version
            ),
        });
    }
    match header.kind.as_str() {
        "mdp" => Ok(ScenarioFile::Mdp(serde_json::from_str(text)?)),
        "gridworld" => Ok(ScenarioFile::Gridworld(serde_json::from_str(text)?)),
        other => Err(Error::SpecParse {
            line: 1,
            column: 1,
            message: format!("unknown scenario kind `{other}`"),
        }),
    }
}

/// Builds a bundle from scenario file text.
pub fn mdp_scenario(text: &str) -> Result<ScenarioBundle> {
    match parse_scenario(text)? {
        ScenarioFile::Mdp(spec) => spec.build(),
        ScenarioFile::Gridworld(spec) => catastrophe_gridworld(
            &GridLayout::parse(&spec.layout.join("\n"))?,
            &GridworldOptions { slip: spec.slip },
        ),
    }
}

impl MdpSpec {
    pub fn build(&self) -> Result<ScenarioBundle> {
        let rewards = RewardSpace::new(self.rewards.iter().copied())?;
        let reward_idx = self
            .reward_values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        rewards.index_near(v).ok_or_else(|| {
                            Error::InvalidConfig(format!("reward {v} not in reward space"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let spaces = Spaces::new(
            Alphabet::new(self.actions.iter().cloned())?,
            Alphabet::new(self.states.iter().cloned())?,
            rewards,
        );
        let initial = spaces
            .observations
            .index_of(&self.initial)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown initial state `{}`", self.initial)))?;
        let truth = FiniteMdp::with_state_action_rewards(
            "truth",
            Arc::clone(&spaces),
            self.transitions.clone(),
            reward_idx.clone(),
            initial,
        )?;
        let n = self.states.len() as f64;
        let mut worlds: Vec<Arc<dyn WorldModel>> = vec![Arc::new(truth)];
        for &d in &self.perturbations {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidConfig(format!("perturbation {d} not in [0, 1]")));
            }
            let t = self
                .transitions
                .iter()
                .map(|sa| {
                    sa.iter()
                        .map(|row| row.iter().map(|p| (1.0 - d) * p + d / n).collect())
                        .collect()
                })
                .collect();
            worlds.push(Arc::new(FiniteMdp::with_state_action_rewards(
                format!("perturbed-{d}"),
                Arc::clone(&spaces),
                t,
                reward_idx.clone(),
                initial,
            )?));
        }
        let mentor: Arc<dyn MentorModel> =
            Arc::new(TabularPolicy::new("mentor", self.mentor.clone(), initial)?);
        let na = self.actions.len();
        let uniform = vec![vec![1.0 / na as f64; na]; self.states.len()];
        let mut mentors = vec![Arc::clone(&mentor)];
        if self.mentor != uniform {
            mentors.push(Arc::new(TabularPolicy::new("uniform", uniform, initial)?));
        }
        ScenarioBundle::new(
            self.name.clone(),
            Environment::new(Arc::clone(&worlds[0]), self.reward_floor)?,
            mentor,
            ModelClass::uniform(worlds)?,
            ModelClass::uniform(mentors)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::History;

    pub(crate) const CHAIN: &str = r#"{
  "format": "pessimist-scenario",
  "version": 1,
  "kind": "mdp",
  "name": "chain",
  "states": ["s0", "s1"],
  "actions": ["stay", "go"],
  "rewards": [0, 0.5, 1],
  "initial": "s0",
  "reward_floor": 0.5,
  "transitions": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]],
  "reward_values": [[0.5, 0.5], [1, 0.5]],
  "mentor": [[0, 1], [1, 0]],
  "perturbations": [0, 0.2]
}"#;

    #[test]
    fn builds_chain() {
        let b = mdp_scenario(CHAIN).unwrap();
        assert_eq!(b.world_class.len(), Some(3));
        assert_eq!(b.mentor_class.len(), Some(2));
    }

    #[test]
    fn zero_perturbation_equals_truth() {
        let b = mdp_scenario(CHAIN).unwrap();
        let p0 = b.world_class.model(b.world_class.index_of("perturbed-0").unwrap()).unwrap();
        for a in 0..2 {
            assert_eq!(
                p0.conditional(&History::new(), a),
                b.environment.truth().conditional(&History::new(), a)
            );
        }
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let broken = CHAIN.replace("\"initial\": \"s0\",", "\"initial\": \"s0\"");
        match mdp_scenario(&broken) {
            Err(Error::SpecParse { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let unknown = CHAIN.replace("\"name\"", "\"nmae\"");
        let e = mdp_scenario(&unknown);
        assert!(matches!(e, Err(Error::SpecParse { line: 5, .. })), "{e:?}");
        let wrong = CHAIN.replace("pessimist-scenario", "other");
        assert!(matches!(mdp_scenario(&wrong), Err(Error::SpecParse { .. })));
    }

    #[test]
    fn gridworld_kind() {
        let text = r#"{"format":"pessimist-scenario","version":1,"kind":"gridworld","layout":["S.","GX"]}"#;
        let b = mdp_scenario(text).unwrap();
        assert_eq!(b.world_class.len(), Some(8));
        assert!(b.event.is_some());
    }
}
