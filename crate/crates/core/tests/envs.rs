mod support;

use std::sync::Arc;

use pessimist_core::agent::AgentConfig;
use pessimist_core::envs::{
    coinflip_scenario, load_scenario, mdp_scenario, parse_scenario, safe_mentor, suboptimal_mentor, Environment,
    Flaw, GridLayout, ScenarioBundle, ScenarioFile, DEFAULT_LAYOUT, HEADS, TAILS,
};
use pessimist_core::harness::{run_episode, run_mentor_only};
use pessimist_core::history::{History, Percept};
use pessimist_core::models::{MentorModel, ModelClass, StationaryPolicy};
use pessimist_core::planner::{truncated_policy_value, PlannerConfig};
use pessimist_core::Error;
use support::rng;

/// Untruncated value recovered from the truncated one.
fn mentor_value(policy: &dyn MentorModel, gamma: f64) -> f64 {
    let b = coinflip_scenario().unwrap();
    let cfg = PlannerConfig::new(0.9, gamma, 0.05).unwrap();
    let v = truncated_policy_value(policy, b.environment.truth().as_ref(), &History::new(), &cfg, &mut rng(1));
    v.value / (1.0 - gamma.powi(cfg.horizon as i32))
}

#[test]
fn coinflip_pays_as_described() {
    let b = coinflip_scenario().unwrap();
    let truth = b.environment.truth();
    let h = History::new();
    assert_eq!(truth.conditional(&h, HEADS).prob_of(&Percept::new(0, 2)), 1.0);
    assert_eq!(truth.conditional(&h, TAILS).prob_of(&Percept::new(0, 1)), 1.0);
    assert_eq!(b.spaces().rewards.values(), &[0.0, 0.5, 1.0]);
}

#[test]
fn mentor_values() {
    let b = coinflip_scenario().unwrap();
    for gamma in [0.5, 0.9, 0.95] {
        assert!((mentor_value(b.mentor.as_ref(), gamma) - 0.75).abs() < 1e-12);
    }
    let noisy = suboptimal_mentor(Arc::clone(&b.mentor), Flaw::Noise { epsilon: 0.5 }).unwrap();
    assert!((mentor_value(&noisy, 0.9) - 0.75).abs() < 1e-12);
    let biased = suboptimal_mentor(Arc::clone(&b.mentor), Flaw::Bias { action: TAILS, prob: 0.9 }).unwrap();
    assert!((mentor_value(&biased, 0.9) - 0.55).abs() < 1e-12);
    let none = suboptimal_mentor(Arc::new(StationaryPolicy::new("p", vec![0.3, 0.7]).unwrap()), Flaw::Noise { epsilon: 0.0 }).unwrap();
    assert_eq!(none.action_probs(&none.initial_state()), vec![0.3, 0.7]);
}

#[test]
fn mentor_only_long_run_reward() {
    let b = coinflip_scenario().unwrap();
    let out = run_mentor_only(&b, 100_000, 11, 0.9).unwrap();
    assert!((out.metrics.mean_reward - 0.75).abs() < 0.01, "{}", out.metrics.mean_reward);
}

#[test]
fn safe_mentor_never_enters_the_catastrophe() {
    let layout = GridLayout::parse(DEFAULT_LAYOUT).unwrap();
    let mentor = safe_mentor(&layout).unwrap();
    for cell in 0..layout.num_cells() {
        let probs = mentor.table()[cell].clone();
        for (a, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                assert_ne!(layout.intended(cell, a), layout.catastrophe(), "cell {cell} action {a}");
            }
        }
    }
    let b = load_scenario("gridworld").unwrap();
    for seed in 0..10 {
        let out = run_mentor_only(&b, 2000, seed, 0.9).unwrap();
        assert_eq!(out.metrics.first_event_time, None);
        assert!(out.trace.iter().all(|r| r.event == Some(false)));
    }
}

#[test]
fn unrealizable_bundles_are_rejected() {
    let b = coinflip_scenario().unwrap();
    let others = ModelClass::uniform(
        b.world_class
            .entries()
            .unwrap()
            .into_iter()
            .map(|(m, _)| m)
            .filter(|m| m.name() != b.environment.truth().name())
            .collect(),
    )
    .unwrap();
    let r = ScenarioBundle::new("x", b.environment.clone(), Arc::clone(&b.mentor), others, b.mentor_class.clone());
    assert!(matches!(r, Err(Error::Unrealizable(_))));
    let stranger: Arc<dyn MentorModel> = Arc::new(StationaryPolicy::new("stranger", vec![0.2, 0.8]).unwrap());
    let r = ScenarioBundle::new("x", b.environment.clone(), stranger, b.world_class.clone(), b.mentor_class.clone());
    assert!(matches!(r, Err(Error::Unrealizable(_))));
    assert!(Environment::new(Arc::clone(b.environment.truth()), 0.0).is_err());
}

#[test]
fn scenario_ids_resolve() {
    for id in pessimist_core::envs::BUILTIN_SCENARIOS {
        assert!(load_scenario(id).is_ok(), "{id}");
    }
    assert!(matches!(load_scenario("no-such-scenario"), Err(Error::UnknownScenario(_))));
}

#[test]
fn gridworld_files_parse() {
    let text = r#"{"format": "pessimist-scenario", "version": 1, "kind": "gridworld",
                   "layout": ["S.", ".G", "X."], "slip": 0.1}"#;
    match parse_scenario(text).unwrap() {
        ScenarioFile::Gridworld(g) => assert_eq!(g.layout.len(), 3),
        other => panic!("{other:?}"),
    }
    let dir = std::env::temp_dir().join(format!("pessimist-grid-{}.json", std::process::id()));
    std::fs::write(&dir, text).unwrap();
    let b = load_scenario(dir.to_str().unwrap()).unwrap();
    std::fs::remove_file(&dir).unwrap();
    assert_eq!(b.world_class.len(), Some(8));
    let bad = text.replace("\"version\": 1", "\"version\": 7");
    assert!(parse_scenario(&bad).is_err());
}

#[test]
fn singleton_mdp_agent_matches_optimal_mentor() {
    let spec = r#"{
      "format": "pessimist-scenario", "version": 1, "kind": "mdp",
      "states": ["s0", "s1"], "actions": ["stay", "go"], "rewards": [0, 0.5, 1],
      "initial": "s0", "reward_floor": 0.5,
      "transitions": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]],
      "reward_values": [[0.5, 0.5], [1, 0.5]],
      "mentor": [[0, 1], [1, 0]]
    }"#;
    let b = mdp_scenario(spec).unwrap();
    assert_eq!(b.world_class.len(), Some(1));
    let agent = run_episode(&b, AgentConfig::new(0.9, 0.9, 0.1).unwrap(), 1000, 3).unwrap();
    let mentor = run_mentor_only(&b, 1000, 3, 0.9).unwrap();
    assert!(agent.error.is_none());
    assert!((agent.metrics.discounted_return_final - mentor.metrics.discounted_return_final).abs() < 1e-9);
}
