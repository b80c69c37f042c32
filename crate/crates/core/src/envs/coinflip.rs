//! Two actions, one trivial observation. Heads pays 1, tails pays 1/2; the
//! mentor flips a fair coin.

use std::sync::Arc;

use super::{Environment, ScenarioBundle};
use crate::error::Result;
use crate::history::Percept;
use crate::models::{ActionRewardModel, MentorModel, ModelClass, StationaryPolicy, WorldModel};
use crate::spaces::{Alphabet, RewardSpace, Spaces};

pub const HEADS: usize = 0;
pub const TAILS: usize = 1;

const R0: usize = 0;
const RHALF: usize = 1;
const R1: usize = 2;

fn spaces() -> Arc<Spaces> {
    Spaces::new(
        Alphabet::new(["heads", "tails"]).expect("static labels"),
        Alphabet::new(["-"]).expect("static labels"),
        RewardSpace::new([0.0, 0.5, 1.0]).expect("static rewards"),
    )
}

fn deterministic(name: &str, sp: &Arc<Spaces>, heads: usize, tails: usize) -> Arc<dyn WorldModel> {
    Arc::new(
        ActionRewardModel::new(
            name,
            Arc::clone(sp),
            vec![vec![(Percept::new(0, heads), 1.0)], vec![(Percept::new(0, tails), 1.0)]],
        )
        .expect("valid rows"),
    )
}

fn world_models() -> Vec<Arc<dyn WorldModel>> {
    let sp = spaces();
    let uniform: Vec<(Percept, f64)> = (0..3).map(|r| (Percept::new(0, r), 1.0 / 3.0)).collect();
    vec![
        deterministic("heads-pays", &sp, R1, RHALF),
        deterministic("tails-pays", &sp, RHALF, R1),
        Arc::new(
            ActionRewardModel::new("iid-uniform", Arc::clone(&sp), vec![uniform.clone(), uniform])
                .expect("valid rows"),
        ),
        deterministic("null-world", &sp, R0, R0),
    ]
}

fn mentor_models() -> Vec<Arc<dyn MentorModel>> {
    vec![
        Arc::new(StationaryPolicy::uniform("fair", 2)),
        Arc::new(StationaryPolicy::new("heads-0.9", vec![0.9, 0.1]).expect("valid")),
        Arc::new(StationaryPolicy::new("tails-0.9", vec![0.1, 0.9]).expect("valid")),
    ]
}

/// Coin-flip world with the given mentor; the mentor is added to the mentor
/// class if no model of that name is present.
pub fn coinflip_with_mentor(mentor: Arc<dyn MentorModel>) -> Result<ScenarioBundle> {
    let worlds = world_models();
    let env = Environment::new(Arc::clone(&worlds[0]), 0.5)?;
    let mut mentors = mentor_models();
    match mentors.iter().position(|m| m.name() == mentor.name()) {
        Some(i) => mentors[i] = Arc::clone(&mentor),
        None => mentors.push(Arc::clone(&mentor)),
    }
    Ok(ScenarioBundle::new(
        "coinflip",
        env,
        mentor,
        ModelClass::uniform(worlds)?,
        ModelClass::uniform(mentors)?,
    )?
    .with_focus_action(HEADS))
}

pub fn coinflip_scenario() -> Result<ScenarioBundle> {
    coinflip_with_mentor(Arc::new(StationaryPolicy::uniform("fair", 2)))
}

/// The world class is just the truth.
pub fn coinflip_singleton_scenario() -> Result<ScenarioBundle> {
    let mut b = coinflip_scenario()?;
    b.name = "coinflip-singleton".into();
    b.world_class = ModelClass::uniform(vec![Arc::clone(b.environment.truth())])?;
    Ok(b)
}
