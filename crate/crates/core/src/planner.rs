//! Finite-horizon pessimistic expectimax.
//!
//! The planner backs up `max_a min_nu E_nu[(1 - gamma) r + gamma V(child)]`
//! at every node to depth `k`, so the adversary picks a model per node. The
//! policy-level max-min (pick a policy, then the worst model for the whole
//! policy) is available as [`static_maxmin_oracle`] for comparison on small
//! instances.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{Error, Result};
use crate::history::{History, Percept, Step};
use crate::models::{MentorModel, ModelState, Sparse, WorldModel};

/// Values below this count as zero for the zero condition.
pub const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Always `horizon(gamma, epsilon)`.
    pub horizon: usize,
    /// Largest `(|A||O||R|)^k` evaluated by exhaustive summation.
    pub exhaustive_limit: u64,
    pub mc_rollouts: usize,
    /// Cache subtree values by model state when every model allows it.
    pub memoize: bool,
    /// Largest number of candidate policy value-vectors the static oracle keeps.
    pub static_cap: usize,
}

impl PlannerConfig {
    pub fn new(beta: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidConfig(format!("beta {beta} not in (0, 1)")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidConfig(format!("gamma {gamma} not in [0, 1)")));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon {epsilon} not in (0, 1]")));
        }
        Ok(Self {
            beta,
            gamma,
            epsilon,
            horizon: horizon(gamma, epsilon),
            exhaustive_limit: 1_000_000,
            mc_rollouts: 1000,
            memoize: true,
            static_cap: 100_000,
        })
    }

    pub fn with_memoize(mut self, memoize: bool) -> Self {
        self.memoize = memoize;
        self
    }

    pub fn with_mc_rollouts(mut self, n: usize) -> Self {
        self.mc_rollouts = n.max(1);
        self
    }

    pub fn with_exhaustive_limit(mut self, limit: u64) -> Self {
        self.exhaustive_limit = limit;
        self
    }

    /// Overrides the derived horizon; tests use this for small fixed depths.
    pub fn with_horizon(mut self, k: usize) -> Self {
        self.horizon = k.max(1);
        self
    }

    /// `1 - gamma^k`, the largest truncated value.
    pub fn value_cap(&self) -> f64 {
        1.0 - self.gamma.powi(self.horizon as i32)
    }
}

/// Smallest `k >= 1` with `gamma^k <= epsilon`.
pub fn horizon(gamma: f64, epsilon: f64) -> usize {
    if gamma <= 0.0 || epsilon >= 1.0 {
        return 1;
    }
    let mut k = ((epsilon.ln() / gamma.ln()).ceil() as usize).max(1);
    while k > 1 && gamma.powi(k as i32 - 1) <= epsilon {
        k -= 1;
    }
    while gamma.powi(k as i32) > epsilon {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub pessimistic_value: f64,
    pub pessimistic_action: usize,
    /// Names of the models the minimum ranged over.
    pub model_set: Vec<String>,
    pub zero_condition: bool,
}

/// A model paired with its folded state at the planning root.
pub type Rooted<'a> = (&'a dyn WorldModel, ModelState);

/// Pessimistic value and action at `history` over `model_set`.
pub fn pessimistic_plan(
    history: &History,
    model_set: &[Arc<dyn WorldModel>],
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    let rooted: Vec<Rooted> = model_set
        .iter()
        .map(|m| (m.as_ref(), m.state_after(history)))
        .collect();
    let (value, action) = plan_from_states(&rooted, cfg)?;
    Ok(PlanResult {
        pessimistic_value: value,
        pessimistic_action: action,
        model_set: model_set.iter().map(|m| m.name().to_string()).collect(),
        zero_condition: value < ZERO_TOLERANCE,
    })
}

/// Subtree values of the max-min search keyed by `(depth left, model states)`.
///
/// Entries stay valid for as long as the same models (in the same order) and
/// the same `gamma` are planned over, so callers may keep one across steps.
pub type PlanMemo = HashMap<(usize, Vec<ModelState>), (f64, usize)>;

/// Subtree values of policy evaluation keyed by `(depth left, policy state, model state)`.
pub type ValueMemo = HashMap<(usize, ModelState, ModelState), f64>;

/// Root value and argmax action (ties to the lowest index).
pub fn plan_from_states(models: &[Rooted], cfg: &PlannerConfig) -> Result<(f64, usize)> {
    plan_with_memo(models, cfg, &mut PlanMemo::new())
}

/// As [`plan_from_states`], reusing `memo` when memoization applies.
pub fn plan_with_memo(
    models: &[Rooted],
    cfg: &PlannerConfig,
    memo: &mut PlanMemo,
) -> Result<(f64, usize)> {
    if models.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let spaces = models[0].0.spaces();
    let use_memo = cfg.memoize && models.iter().all(|(m, _)| m.memoizable());
    let mut search = MaxMin {
        models: models.iter().map(|(m, _)| *m).collect(),
        rewards: spaces.rewards.values(),
        num_actions: spaces.num_actions(),
        gamma: cfg.gamma,
        memo: use_memo.then_some(memo),
    };
    let states: Vec<ModelState> = models.iter().map(|(_, s)| s.clone()).collect();
    Ok(search.node(cfg.horizon, &states))
}

/// Expected one-step backup of `pred` given child values aligned with the
/// sorted outcome list `union`.
fn backup(pred: &Sparse<Percept>, union: &[Percept], child: &[f64], rewards: &[f64], gamma: f64) -> f64 {
    pred.iter()
        .map(|(p, w)| {
            let idx = union.binary_search(p).expect("outcome missing from union");
            w * ((1.0 - gamma) * rewards[p.reward] + gamma * child[idx])
        })
        .sum()
}

fn outcome_union(preds: &[Sparse<Percept>]) -> Vec<Percept> {
    let mut u: Vec<Percept> = preds.iter().flatten().map(|(p, _)| *p).collect();
    u.sort_unstable();
    u.dedup();
    u
}

fn advance_all(models: &[&dyn WorldModel], states: &[ModelState], step: &Step) -> Vec<ModelState> {
    models
        .iter()
        .zip(states)
        .map(|(m, s)| m.advance(s, step))
        .collect()
}

struct MaxMin<'a> {
    models: Vec<&'a dyn WorldModel>,
    rewards: &'a [f64],
    num_actions: usize,
    gamma: f64,
    memo: Option<&'a mut PlanMemo>,
}

impl MaxMin<'_> {
    fn node(&mut self, depth_left: usize, states: &[ModelState]) -> (f64, usize) {
        if depth_left == 0 {
            return (0.0, 0);
        }
        if let Some(hit) = self
            .memo
            .as_ref()
            .and_then(|m| m.get(&(depth_left, states.to_vec())))
        {
            return *hit;
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..self.num_actions {
            let preds: Vec<Sparse<Percept>> = self
                .models
                .iter()
                .zip(states)
                .map(|(m, s)| m.predict(s, a))
                .collect();
            let union = outcome_union(&preds);
            let child: Vec<f64> = if depth_left == 1 {
                vec![0.0; union.len()]
            } else {
                union
                    .iter()
                    .map(|x| {
                        let next = advance_all(&self.models, states, &Step::new(a, *x, false));
                        self.node(depth_left - 1, &next).0
                    })
                    .collect()
            };
            let worst = preds
                .iter()
                .map(|p| backup(p, &union, &child, self.rewards, self.gamma))
                .fold(f64::INFINITY, f64::min);
            if worst > best.0 {
                best = (worst, a);
            }
        }
        if let Some(m) = self.memo.as_mut() {
            m.insert((depth_left, states.to_vec()), best);
        }
        best
    }
}

/// How a truncated policy value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    /// Exact, with subtree values cached by model state.
    Memoized,
    /// Exact sum over every positive-probability path.
    Exhaustive,
    /// Mean of sampled discounted truncated returns.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyValue {
    pub value: f64,
    pub method: EvalMethod,
    /// Standard error of the Monte Carlo mean; 0 for exact methods.
    pub std_error: f64,
}

/// `(1 - gamma) E[sum_{j<k} gamma^j r_j]` when `policy` acts in `model` from `history`.
pub fn truncated_policy_value<R: Rng + ?Sized>(
    policy: &dyn MentorModel,
    model: &dyn WorldModel,
    history: &History,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> PolicyValue {
    truncated_policy_value_from_states(
        (policy, policy.state_after(history)),
        (model, model.state_after(history)),
        cfg,
        rng,
    )
}

pub fn truncated_policy_value_from_states<R: Rng + ?Sized>(
    policy: (&dyn MentorModel, ModelState),
    model: (&dyn WorldModel, ModelState),
    cfg: &PlannerConfig,
    rng: &mut R,
) -> PolicyValue {
    truncated_policy_value_with_memo(policy, model, cfg, rng, &mut ValueMemo::new())
}

/// As [`truncated_policy_value_from_states`], reusing `memo` (valid for one
/// fixed policy, model and `gamma`) when memoization applies.
pub fn truncated_policy_value_with_memo<R: Rng + ?Sized>(
    policy: (&dyn MentorModel, ModelState),
    model: (&dyn WorldModel, ModelState),
    cfg: &PlannerConfig,
    rng: &mut R,
    memo_table: &mut ValueMemo,
) -> PolicyValue {
    let spaces = model.0.spaces();
    let memo = cfg.memoize && policy.0.memoizable() && model.0.memoizable();
    let tree = (spaces.branching() as f64).powi(cfg.horizon as i32);
    if memo || tree <= cfg.exhaustive_limit as f64 {
        let mut eval = Evaluator {
            policy: policy.0,
            model: model.0,
            rewards: spaces.rewards.values(),
            gamma: cfg.gamma,
            memo: memo.then_some(memo_table),
        };
        PolicyValue {
            value: eval.node(cfg.horizon, &policy.1, &model.1),
            method: if memo {
                EvalMethod::Memoized
            } else {
                EvalMethod::Exhaustive
            },
            std_error: 0.0,
        }
    } else {
        let (value, std_error) = monte_carlo_value(policy, model, cfg, rng);
        PolicyValue {
            value,
            method: EvalMethod::MonteCarlo,
            std_error,
        }
    }
}

struct Evaluator<'a> {
    policy: &'a dyn MentorModel,
    model: &'a dyn WorldModel,
    rewards: &'a [f64],
    gamma: f64,
    memo: Option<&'a mut ValueMemo>,
}

impl Evaluator<'_> {
    fn node(&mut self, depth_left: usize, ps: &ModelState, ms: &ModelState) -> f64 {
        if depth_left == 0 {
            return 0.0;
        }
        let key = (depth_left, ps.clone(), ms.clone());
        if let Some(v) = self.memo.as_ref().and_then(|m| m.get(&key)) {
            return *v;
        }
        let mut total = 0.0;
        for (a, pa) in self.policy.action_probs(ps).into_iter().enumerate() {
            if pa <= 0.0 {
                continue;
            }
            for (x, w) in self.model.predict(ms, a) {
                let step = Step::new(a, x, false);
                let cont = if depth_left > 1 {
                    self.node(
                        depth_left - 1,
                        &self.policy.advance(ps, &step),
                        &self.model.advance(ms, &step),
                    )
                } else {
                    0.0
                };
                total += pa * w * ((1.0 - self.gamma) * self.rewards[x.reward] + self.gamma * cont);
            }
        }
        if let Some(m) = self.memo.as_mut() {
            m.insert(key, total);
        }
        total
    }
}

/// Mean and standard error of `mc_rollouts` sampled truncated returns.
pub fn monte_carlo_value<R: Rng + ?Sized>(
    policy: (&dyn MentorModel, ModelState),
    model: (&dyn WorldModel, ModelState),
    cfg: &PlannerConfig,
    rng: &mut R,
) -> (f64, f64) {
    let rewards = model.0.spaces().rewards.values();
    let n = cfg.mc_rollouts.max(1);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let mut ps = policy.1.clone();
        let mut ms = model.1.clone();
        let mut discount = 1.0;
        let mut ret = 0.0;
        for _ in 0..cfg.horizon {
            let a = crate::dist::sample_index(&policy.0.action_probs(&ps), rng);
            let pred = model.0.predict(&ms, a);
            let probs: Vec<f64> = pred.iter().map(|(_, w)| *w).collect();
            let x = pred[crate::dist::sample_index(&probs, rng)].0;
            ret += (1.0 - cfg.gamma) * discount * rewards[x.reward];
            discount *= cfg.gamma;
            let step = Step::new(a, x, false);
            ps = policy.0.advance(&ps, &step);
            ms = model.0.advance(&ms, &step);
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    let mean = sum / n as f64;
    let var = if n > 1 {
        ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / n as f64).sqrt())
}

/// Policy-level max-min over deterministic depth-`k` policy trees.
///
/// Enumerates, per node, the value vectors (one entry per model) of every
/// sub-policy, discarding vectors that are dominated in every coordinate, and
/// returns `max_policy min_model value`.
pub fn static_maxmin_oracle(
    history: &History,
    model_set: &[Arc<dyn WorldModel>],
    cfg: &PlannerConfig,
) -> Result<f64> {
    if model_set.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    let models: Vec<&dyn WorldModel> = model_set.iter().map(|m| m.as_ref()).collect();
    let states: Vec<ModelState> = models.iter().map(|m| m.state_after(history)).collect();
    let spaces = models[0].spaces();
    let oracle = StaticOracle {
        models,
        rewards: spaces.rewards.values(),
        num_actions: spaces.num_actions(),
        gamma: cfg.gamma,
        cap: cfg.static_cap,
    };
    let frontier = oracle.frontier(cfg.horizon, &states)?;
    Ok(frontier
        .iter()
        .map(|v| v.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max))
}

struct StaticOracle<'a> {
    models: Vec<&'a dyn WorldModel>,
    rewards: &'a [f64],
    num_actions: usize,
    gamma: f64,
    cap: usize,
}

impl StaticOracle<'_> {
    fn frontier(&self, depth_left: usize, states: &[ModelState]) -> Result<Vec<Vec<f64>>> {
        let m = self.models.len();
        if depth_left == 0 {
            return Ok(vec![vec![0.0; m]]);
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        for a in 0..self.num_actions {
            let preds: Vec<Sparse<Percept>> = self
                .models
                .iter()
                .zip(states)
                .map(|(model, s)| model.predict(s, a))
                .collect();
            let union = outcome_union(&preds);
            let children: Vec<Vec<Vec<f64>>> = union
                .iter()
                .map(|x| {
                    let next = advance_all(&self.models, states, &Step::new(a, *x, false));
                    self.frontier(depth_left - 1, &next)
                })
                .collect::<Result<_>>()?;
            let combos: f64 = children.iter().map(|c| c.len() as f64).product();
            if combos + out.len() as f64 > self.cap as f64 {
                return Err(Error::InstanceTooLarge(format!(
                    "{combos} sub-policies at depth {depth_left}"
                )));
            }
            // Odometer over one sub-policy choice per outcome.
            let mut choice = vec![0usize; union.len()];
            loop {
                let vector: Vec<f64> = (0..m)
                    .map(|i| {
                        let child: Vec<f64> = choice
                            .iter()
                            .enumerate()
                            .map(|(x, &c)| children[x][c][i])
                            .collect();
                        backup(&preds[i], &union, &child, self.rewards, self.gamma)
                    })
                    .collect();
                out.push(vector);
                let mut pos = 0;
                while pos < choice.len() {
                    choice[pos] += 1;
                    if choice[pos] < children[pos].len() {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == choice.len() {
                    break;
                }
            }
            out = pareto(out);
        }
        Ok(out)
    }
}

/// Keeps vectors not weakly dominated by an earlier-kept or later vector.
fn pareto(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    'outer: for v in vectors {
        for k in &kept {
            if k.iter().zip(&v).all(|(a, b)| a >= b) {
                continue 'outer;
            }
        }
        kept.retain(|k| !v.iter().zip(k).all(|(a, b)| a >= b));
        kept.push(v);
    }
    kept
}

/// Distribution of the next `k` steps under `policy` acting in `model`, over
/// every sequence in `(A x O x R)^k` in lexicographic order.
pub fn future_measure(
    model: &dyn WorldModel,
    policy: &dyn MentorModel,
    history: &History,
    k: usize,
) -> Categorical<Vec<Step>> {
    let spaces = model.spaces();
    let (na, no, nr) = (
        spaces.num_actions(),
        spaces.num_observations(),
        spaces.num_rewards(),
    );
    let per = na * no * nr;
    let total = per.pow(k as u32);
    let mut support = Vec::with_capacity(total);
    let mut probs = Vec::with_capacity(total);
    for code in 0..total {
        let mut steps = Vec::with_capacity(k);
        let mut rest = code;
        let mut digits = vec![0; k];
        for d in digits.iter_mut().rev() {
            *d = rest % per;
            rest /= per;
        }
        for d in digits {
            let a = d / (no * nr);
            let x = Percept::from_index(d % (no * nr), nr);
            steps.push(Step::new(a, x, false));
        }
        support.push(steps);
    }
    for seq in &support {
        let mut ps = policy.state_after(history);
        let mut ms = model.state_after(history);
        let mut p = 1.0;
        for step in seq {
            p *= policy.action_probs(&ps)[step.action];
            if p == 0.0 {
                break;
            }
            p *= model
                .predict(&ms, step.action)
                .iter()
                .filter(|(x, _)| *x == step.percept())
                .map(|(_, w)| w)
                .sum::<f64>();
            if p == 0.0 {
                break;
            }
            ps = policy.advance(&ps, step);
            ms = model.advance(&ms, step);
        }
        probs.push(p);
    }
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    Categorical::new(support, probs).expect("future measure is a distribution")
}
