mod support;

use std::sync::Arc;

use pessimist_core::belief::BeliefState;
use pessimist_core::envs::{sequence_instance, Environment};
use pessimist_core::history::Step;
use pessimist_core::models::{ModelClass, WorldModel};
use pessimist_core::rng::{RngStreams, Stream};
use proptest::prelude::*;
use rand::Rng;
use support::{exact_posterior, rng, sample_history, spaces, threshold_prefix, RandomTreeModel};

proptest! {
    #[test]
    fn threshold_set_is_minimal_sorted_prefix(
        seed in any::<u64>(), n in 2usize..12, len in 0usize..15, alpha in 0.001f64..0.999,
    ) {
        let mut r = rng(seed);
        let sp = spaces(2, 2, 2);
        let mut entries: Vec<(Arc<dyn WorldModel>, f64)> = (0..n)
            .map(|i| {
                let m: Arc<dyn WorldModel> = Arc::new(RandomTreeModel::new(format!("m{i}"), Arc::clone(&sp), r.gen()));
                (m, r.gen_range(0.01..1.0))
            })
            .collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let h = sample_history(entries[r.gen_range(0..n)].0.as_ref(), len, &mut r);
        let mut belief = BeliefState::new(ModelClass::finite(entries.clone()).unwrap());
        for t in 0..h.len() {
            belief.observe(&h.prefix(t), h.steps()[t]).unwrap();
        }
        let got = belief.posterior_up_to_threshold(alpha).unwrap();
        let normalized: Vec<_> = entries.iter().map(|(m, w)| (Arc::clone(m), w / total)).collect();
        let (members, weights) = threshold_prefix(&exact_posterior(&normalized, &h), alpha);
        prop_assert_eq!(&got.members, &members);
        prop_assert_eq!(got.last_model, *members.last().unwrap());
        for (a, b) in got.posterior.iter().zip(&weights) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn posterior_sums_to_one_and_keeps_the_truth_alive() {
    let (truth, class) = sequence_instance().unwrap();
    let truth_index = class.index_of(truth.name()).unwrap();
    for seed in 0..5 {
        let mut env = Environment::new(Arc::clone(&truth), 1.0).unwrap();
        let mut r = RngStreams::new(seed).stream(Stream::Env);
        let mut belief = BeliefState::new(class.clone());
        for t in 0..3000 {
            let step = Step::new(0, env.sample(0, &mut r).unwrap(), false);
            env.advance(&step);
            let context = belief.history().clone();
            belief.observe(&context, step).unwrap();
            if t % 100 == 99 {
                let w = belief.exact_posterior().unwrap();
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w[truth_index] > 0.0, "seed {seed} step {t}: truth lost");
            }
        }
    }
}
