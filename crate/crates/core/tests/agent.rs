mod support;

use std::sync::Arc;

use pessimist_core::agent::{decision_from_values, AgentConfig, ZNoise};
use pessimist_core::belief::BeliefState;
use pessimist_core::envs::{coinflip_scenario, load_scenario, mdp_scenario, Environment, HEADS, TAILS};
use pessimist_core::harness::{run_episode, EpisodeRunner};
use pessimist_core::history::{History, Percept, Step};
use pessimist_core::models::{ActionRewardModel, WorldModel};
use pessimist_core::planner::{pessimistic_plan, truncated_policy_value, PlannerConfig};
use pessimist_core::rng::{RngStreams, Stream};
use pessimist_core::spaces::{Alphabet, RewardSpace, Spaces};
use pessimist_core::Error;
use proptest::prelude::*;
use rand::Rng;
use support::rng;

/// Exact probability of deferring: the zero condition, or else the chance
/// over sampled mentor `i`, sampled world `j` and `Z` that `X_ij > Y + Z`.
fn deferral_probability(h: &History, cfg: &PlannerConfig, z: ZNoise) -> f64 {
    let b = coinflip_scenario().unwrap();
    let mut world = BeliefState::new(b.world_class.clone());
    let mut mentor = BeliefState::new(b.mentor_class.clone());
    for t in 0..h.len() {
        world.observe(&h.prefix(t), h.steps()[t]).unwrap();
        mentor.observe(&h.prefix(t), h.steps()[t]).unwrap();
    }
    let set = world.posterior_up_to_threshold(cfg.beta).unwrap();
    let members: Vec<Arc<dyn WorldModel>> = set.members.iter().map(|&i| Arc::clone(world.model(i))).collect();
    let y = pessimistic_plan(h, &members, cfg).unwrap().pessimistic_value;
    if y < 1e-12 {
        return 1.0;
    }
    let p = mentor.exact_posterior().unwrap();
    let q = world.exact_posterior().unwrap();
    let mut total = 0.0;
    for (i, pi) in p.iter().enumerate().filter(|(_, p)| **p > 0.0) {
        for (j, qj) in q.iter().enumerate().filter(|(_, q)| **q > 0.0) {
            let x = truncated_policy_value(
                mentor.model(i).as_ref(),
                world.model(j).as_ref(),
                h,
                cfg,
                &mut rng(0),
            )
            .value;
            total += pi * qj * z.cdf(x - y);
        }
    }
    total
}

fn coin_history(seed: u64, len: usize) -> History {
    let mut r = rng(seed);
    let mut h = History::new();
    for _ in 0..len {
        let a = r.gen_range(0..2);
        let reward = if a == HEADS { 2 } else { 1 };
        h.push(Step::new(a, Percept::new(0, reward), r.gen_bool(0.5)));
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_condition_always_defers(x in -1.0f64..2.0, y in prop_oneof![Just(0.0), 0.0f64..1.0, 0.0f64..1e-11], z in 0.0f64..4.0) {
        let d = decision_from_values(x, y, z, 1);
        if d.zero_condition {
            prop_assert!(d.defer);
            prop_assert!(d.action.is_none());
        }
    }

    #[test]
    fn agent_defers_on_every_zero_condition(seed in any::<u64>(), beta in 0.3f64..0.99) {
        let b = load_scenario("coinflip").unwrap();
        let cfg = AgentConfig::new(beta, 0.8, 0.2).unwrap();
        let out = run_episode(&b, cfg, 30, seed).unwrap();
        for r in &out.trace {
            prop_assert!(!r.zero_condition || r.queried);
        }
    }

    #[test]
    fn wider_noise_never_defers_more(seed in any::<u64>(), len in 0usize..8, beta in 0.2f64..0.95) {
        let h = coin_history(seed, len);
        let cfg = PlannerConfig::new(beta, 0.7, 0.1).unwrap();
        let narrow = deferral_probability(&h, &cfg, ZNoise::Uniform { upper: 2.0 });
        let wide = deferral_probability(&h, &cfg, ZNoise::Uniform { upper: 4.0 });
        prop_assert!(wide <= narrow + 1e-12, "{wide} > {narrow}");
    }
}

#[test]
fn reward_floor_holds_in_realized_play() {
    let sp = Spaces::new(
        Alphabet::new(["a", "b"]).unwrap(),
        Alphabet::new(["-"]).unwrap(),
        RewardSpace::default_grid(),
    );
    let truth: Arc<dyn WorldModel> = Arc::new(
        ActionRewardModel::new(
            "floor",
            Arc::clone(&sp),
            vec![
                vec![(Percept::new(0, 1), 0.5), (Percept::new(0, 4), 0.5)],
                vec![(Percept::new(0, 2), 0.3), (Percept::new(0, 3), 0.7)],
            ],
        )
        .unwrap(),
    );
    let env = Environment::new(Arc::clone(&truth), 0.25).unwrap();
    let mut r = rng(9);
    for i in 0..2000 {
        let p = env.sample(i % 2, &mut r).unwrap();
        assert!(sp.rewards.value(p.reward) >= 0.25);
    }
    let below: Arc<dyn WorldModel> = Arc::new(
        ActionRewardModel::new("zero", Arc::clone(&sp), vec![vec![(Percept::new(0, 0), 1.0)]; 2]).unwrap(),
    );
    let env = Environment::new(below, 0.25).unwrap();
    assert!(matches!(env.sample(0, &mut r), Err(Error::InvalidConfig(_))));
}

#[test]
fn episodes_with_a_quarter_floor_never_see_less() {
    let spec = r#"{
      "format": "pessimist-scenario", "version": 1, "kind": "mdp",
      "states": ["s0", "s1"], "actions": ["stay", "go"], "initial": "s0", "reward_floor": 0.25,
      "transitions": [[[0.6, 0.4], [0.1, 0.9]], [[0.5, 0.5], [0.9, 0.1]]],
      "reward_values": [[0.25, 0.75], [1, 0.5]],
      "mentor": [[0.5, 0.5], [0.5, 0.5]],
      "perturbations": [0.3]
    }"#;
    let b = mdp_scenario(spec).unwrap();
    for seed in 0..5 {
        let out = run_episode(&b, AgentConfig::new(0.8, 0.8, 0.1).unwrap(), 500, seed).unwrap();
        assert!(out.error.is_none());
        assert!(out.trace.iter().all(|r| r.reward >= 0.25));
    }
}

#[test]
fn same_seed_same_trace_end_to_end() {
    for id in ["coinflip", "coinflip-biased-mentor", "gridworld"] {
        let b = load_scenario(id).unwrap();
        let cfg = AgentConfig::new(0.9, 0.9, 0.1).unwrap();
        let a = run_episode(&b, cfg.clone(), 300, 17).unwrap();
        let c = run_episode(&b, cfg, 300, 17).unwrap();
        assert_eq!(
            serde_json::to_string(&a.trace).unwrap(),
            serde_json::to_string(&c.trace).unwrap(),
            "{id}"
        );
    }
}

#[test]
fn stepwise_runner_matches_run_episode() {
    let b = load_scenario("coinflip").unwrap();
    let cfg = AgentConfig::new(0.9, 0.9, 0.1).unwrap();
    let headless = run_episode(&b, cfg.clone(), 200, 4).unwrap();
    let mut runner = EpisodeRunner::new(&b, cfg, 200, 4).unwrap();
    let mut mentor = pessimist_core::agent::ProgrammaticMentor::new(
        Arc::clone(&b.mentor),
        RngStreams::new(4).stream(Stream::Mentor),
    );
    while !runner.is_finished() {
        runner.step(&mut mentor).unwrap();
    }
    assert_eq!(runner.trace(), headless.trace.as_slice());
}

#[test]
fn first_step_defers_on_the_zero_condition() {
    let b = load_scenario("coinflip").unwrap();
    let out = run_episode(&b, AgentConfig::new(0.9, 0.9, 0.1).unwrap(), 100, 2).unwrap();
    let first = &out.trace[0];
    // Nothing has been seen yet, so the always-zero world is in the set.
    assert!(first.zero_condition && first.queried);
    assert!(first.action_index == HEADS || first.action_index == TAILS);
}
