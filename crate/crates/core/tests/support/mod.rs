//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls the planner or the belief engine.
#![allow(dead_code)]

use std::sync::Arc;

use pessimist_core::history::{History, Percept, Step};
use pessimist_core::models::{ModelState, Sparse, WorldModel};
use pessimist_core::spaces::{Alphabet, RewardSpace, Spaces};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::smallvec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `na` actions, `no` observations and `nr` evenly spaced rewards in `[0, 1]`.
pub fn spaces(na: usize, no: usize, nr: usize) -> Arc<Spaces> {
    assert!(nr >= 2);
    Spaces::new(
        Alphabet::new((0..na).map(|i| format!("a{i}"))).unwrap(),
        Alphabet::new((0..no).map(|i| format!("o{i}"))).unwrap(),
        RewardSpace::new((0..nr).map(|i| i as f64 / (nr - 1) as f64)).unwrap(),
    )
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A model whose conditional at every history is an independent random
/// distribution (about a third of outcomes get probability zero). The state
/// is a hash of the whole history, so it is genuinely history-based.
#[derive(Debug)]
pub struct RandomTreeModel {
    name: String,
    spaces: Arc<Spaces>,
    seed: u64,
    memo: bool,
}

impl RandomTreeModel {
    pub fn new(name: impl Into<String>, spaces: Arc<Spaces>, seed: u64) -> Self {
        Self {
            name: name.into(),
            spaces,
            seed,
            memo: false,
        }
    }

    /// Declares the hashed state safe to memoize on.
    pub fn memoizable(mut self) -> Self {
        self.memo = true;
        self
    }
}

impl WorldModel for RandomTreeModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    fn initial_state(&self) -> ModelState {
        smallvec![0]
    }

    fn advance(&self, state: &ModelState, step: &Step) -> ModelState {
        let code = (step.action as u64) << 40 | (step.observation as u64) << 20 | step.reward as u64;
        smallvec![mix(state[0] ^ mix(code))]
    }

    fn predict(&self, state: &ModelState, action: usize) -> Sparse<Percept> {
        let mut r = rng(mix(self.seed ^ mix(state[0]) ^ (action as u64) << 56));
        let n = self.spaces.num_percepts();
        let mut w: Vec<f64> = (0..n)
            .map(|_| if r.gen_bool(0.35) { 0.0 } else { r.gen::<f64>() + 0.05 })
            .collect();
        if w.iter().all(|x| *x == 0.0) {
            w[r.gen_range(0..n)] = 1.0;
        }
        let total: f64 = w.iter().sum();
        let nr = self.spaces.num_rewards();
        w.iter()
            .enumerate()
            .filter(|(_, x)| **x > 0.0)
            .map(|(i, x)| (Percept::from_index(i, nr), x / total))
            .collect()
    }

    fn memoizable(&self) -> bool {
        self.memo
    }
}

/// Samples `len` steps with uniformly random actions from `model`.
pub fn sample_history<R: Rng>(model: &dyn WorldModel, len: usize, rng: &mut R) -> History {
    let na = model.spaces().num_actions();
    let mut h = History::new();
    for _ in 0..len {
        let a = rng.gen_range(0..na);
        let c = model.conditional(&h, a);
        let p = *c.sample(rng);
        h.push(Step::new(a, p, false));
    }
    h
}

/// Probability `model` assigns to the percepts of `h` given its actions,
/// computed step by step from the dense conditionals of each prefix.
pub fn likelihood(model: &dyn WorldModel, h: &History) -> f64 {
    let mut p = 1.0;
    for t in 0..h.len() {
        let step = h.steps()[t];
        p *= model.conditional(&h.prefix(t), step.action).prob_of(&step.percept());
    }
    p
}

/// Normalized `prior * likelihood` in log space.
pub fn exact_posterior(models: &[(Arc<dyn WorldModel>, f64)], h: &History) -> Vec<f64> {
    let logs: Vec<f64> = models
        .iter()
        .map(|(m, w)| {
            let mut l = w.ln();
            for t in 0..h.len() {
                let step = h.steps()[t];
                l += m
                    .conditional(&h.prefix(t), step.action)
                    .prob_of(&step.percept())
                    .ln();
            }
            l
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// The shortest prefix of the posterior sorted descending (ties by index)
/// whose mass exceeds `alpha`, with the members' posteriors.
pub fn threshold_prefix(posterior: &[f64], alpha: f64) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..posterior.len()).collect();
    order.sort_by(|&i, &j| posterior[j].total_cmp(&posterior[i]).then(i.cmp(&j)));
    let mut mass = 0.0;
    let mut members = Vec::new();
    for i in order {
        members.push(i);
        mass += posterior[i];
        if mass > alpha {
            break;
        }
    }
    let w = members.iter().map(|&i| posterior[i]).collect();
    (members, w)
}

fn decode(code: usize, depth: usize, spaces: &Spaces) -> Vec<Step> {
    let (no, nr) = (spaces.num_observations(), spaces.num_rewards());
    let per = spaces.branching();
    let mut digits = vec![0; depth];
    let mut rest = code;
    for d in digits.iter_mut().rev() {
        *d = rest % per;
        rest /= per;
    }
    digits
        .into_iter()
        .map(|d| Step::new(d / (no * nr), Percept::from_index(d % (no * nr), nr), false))
        .collect()
}

/// Max-min value and argmax action by filling the whole table of depth-`k`
/// extensions of `h` bottom-up. Leaves hold the discounted reward collected
/// along their path; every inner node is `max_a min_nu E_nu[child]`.
pub fn table_plan(models: &[Arc<dyn WorldModel>], h: &History, gamma: f64, k: usize) -> (f64, usize) {
    let spaces = Arc::clone(models[0].spaces());
    let per = spaces.branching();
    let np = spaces.num_percepts();
    let nr = spaces.num_rewards();
    let rewards = spaces.rewards.values().to_vec();

    let mut level: Vec<f64> = (0..per.pow(k as u32))
        .map(|code| {
            decode(code, k, &spaces)
                .iter()
                .enumerate()
                .map(|(j, s)| (1.0 - gamma) * gamma.powi(j as i32) * rewards[s.reward])
                .sum()
        })
        .collect();
    let mut root_action = 0;
    for depth in (0..k).rev() {
        let mut next = Vec::with_capacity(per.pow(depth as u32));
        for code in 0..per.pow(depth as u32) {
            let mut hist = h.clone();
            for s in decode(code, depth, &spaces) {
                hist.push(s);
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..spaces.num_actions() {
                let worst = models
                    .iter()
                    .map(|m| {
                        m.conditional(&hist, a)
                            .iter()
                            .map(|(p, w)| w * level[code * per + a * np + p.index(nr)])
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                if worst > best {
                    best = worst;
                    if depth == 0 {
                        root_action = a;
                    }
                }
            }
            next.push(best);
        }
        level = next;
    }
    (level[0], root_action)
}

/// Optimal normalized value of a tabular MDP by value iteration over
/// `horizon` steps from every state; `horizon = None` iterates to convergence.
/// `trans[s][a][s']`, `reward[s][a][s']` are reward values.
pub fn value_iteration(
    trans: &[Vec<Vec<f64>>],
    reward: &[Vec<Vec<f64>>],
    gamma: f64,
    horizon: Option<usize>,
) -> Vec<f64> {
    let ns = trans.len();
    let mut v = vec![0.0; ns];
    let mut iter = 0;
    loop {
        let nv: Vec<f64> = (0..ns)
            .map(|s| {
                trans[s]
                    .iter()
                    .enumerate()
                    .map(|(a, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(s2, p)| p * ((1.0 - gamma) * reward[s][a][s2] + gamma * v[s2]))
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        iter += 1;
        let delta = nv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = nv;
        match horizon {
            Some(k) if iter == k => return v,
            None if delta < 1e-15 => return v,
            _ => {}
        }
    }
}
