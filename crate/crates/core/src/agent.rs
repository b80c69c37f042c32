//! The deferring agent: plan pessimistically, Thompson-sample the mentor's
//! value, and hand over control when that value clearly beats the plan.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::dist::sample_index;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::history::{History, Step};
use crate::models::{MentorModel, ModelClass, ModelState, WorldModel};
use crate::planner::{
    plan_with_memo, truncated_policy_value_with_memo, EvalMethod, PlanMemo, PlannerConfig, Rooted,
    ValueMemo, ZERO_TOLERANCE,
};
use crate::rng::{RngStreams, Stream, StreamRng};

/// Cached subtree values across all memos before they are dropped.
const MEMO_BUDGET: usize = 1 << 21;

/// Distribution of the deferral noise `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZNoise {
    /// Uniform on `(0, upper]`.
    Uniform { upper: f64 },
    Exponential { rate: f64 },
}

impl Default for ZNoise {
    fn default() -> Self {
        ZNoise::Uniform { upper: 2.0 }
    }
}

impl ZNoise {
    /// Requires positive density near 0 and `P(Z > 1) > 0`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ZNoise::Uniform { upper } if upper > 1.0 && upper.is_finite() => Ok(()),
            ZNoise::Exponential { rate } if rate > 0.0 && rate.is_finite() => Ok(()),
            other => Err(Error::InvalidConfig(format!(
                "noise {other:?} must put mass near 0 and above 1"
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ZNoise::Uniform { upper } => upper * (1.0 - rng.gen::<f64>()),
            ZNoise::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
        }
    }

    /// `P(Z < z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match *self {
            ZNoise::Uniform { upper } => (z / upper).min(1.0),
            ZNoise::Exponential { rate } => 1.0 - (-rate * z).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub planner: PlannerConfig,
    pub z_noise: ZNoise,
}

impl AgentConfig {
    pub fn new(beta: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        Ok(Self {
            planner: PlannerConfig::new(beta, gamma, epsilon)?,
            z_noise: ZNoise::default(),
        })
    }

    pub fn with_z_noise(mut self, z: ZNoise) -> Result<Self> {
        z.validate()?;
        self.z_noise = z;
        Ok(self)
    }
}

/// Outcome of one deferral decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDecision {
    /// Sampled mentor value; absent when the zero condition short-circuits.
    pub x: Option<f64>,
    pub x_method: Option<EvalMethod>,
    /// Pessimistic value.
    pub y: f64,
    pub z: Option<f64>,
    pub zero_condition: bool,
    pub defer: bool,
    /// The action taken when not deferring.
    pub action: Option<usize>,
    pub pessimistic_action: usize,
    pub model_set_size: usize,
    pub sampled_world: Option<String>,
    pub sampled_mentor: Option<String>,
}

/// Defer iff the sampled mentor value beats the pessimistic value plus noise.
pub fn deferral_rule(x: f64, y: f64, z: f64) -> bool {
    x > y + z
}

/// A decision made without consulting beliefs, for fixed `(x, y, z)`.
pub fn decision_from_values(x: f64, y: f64, z: f64, pessimistic_action: usize) -> StepDecision {
    let zero_condition = y < ZERO_TOLERANCE;
    let defer = zero_condition || deferral_rule(x, y, z);
    StepDecision {
        x: (!zero_condition).then_some(x),
        x_method: None,
        y,
        z: (!zero_condition).then_some(z),
        zero_condition,
        defer,
        action: (!defer).then_some(pessimistic_action),
        pessimistic_action,
        model_set_size: 0,
        sampled_world: None,
        sampled_mentor: None,
    }
}

/// Supplies the action when the agent defers.
pub trait MentorProvider {
    fn choose(&mut self, history: &History, decision: &StepDecision) -> Result<usize>;

    /// Sees every completed step, deferred or not.
    fn observe(&mut self, _step: &Step) {}
}

/// Samples a mentor policy from its own stream.
#[derive(Debug)]
pub struct ProgrammaticMentor {
    policy: Arc<dyn MentorModel>,
    state: ModelState,
    rng: StreamRng,
}

impl ProgrammaticMentor {
    pub fn new(policy: Arc<dyn MentorModel>, rng: StreamRng) -> Self {
        let state = policy.initial_state();
        Self { policy, state, rng }
    }

    pub fn act(&mut self) -> usize {
        sample_index(&self.policy.action_probs(&self.state), &mut self.rng)
    }
}

impl MentorProvider for ProgrammaticMentor {
    fn choose(&mut self, _history: &History, _decision: &StepDecision) -> Result<usize> {
        Ok(self.act())
    }

    fn observe(&mut self, step: &Step) {
        self.state = self.policy.advance(&self.state, step);
    }
}

/// Always answers with the same action.
#[derive(Debug, Clone, Copy)]
pub struct FixedMentor(pub usize);

impl MentorProvider for FixedMentor {
    fn choose(&mut self, _history: &History, _decision: &StepDecision) -> Result<usize> {
        Ok(self.0)
    }
}

/// Refuses every request.
#[derive(Debug, Clone, Copy)]
pub struct NoMentor;

impl MentorProvider for NoMentor {
    fn choose(&mut self, _history: &History, _decision: &StepDecision) -> Result<usize> {
        Err(Error::MentorUnavailable("no mentor attached".into()))
    }
}

/// Agent state for one episode.
pub struct Agent {
    cfg: AgentConfig,
    world: BeliefState<dyn WorldModel>,
    mentor: BeliefState<dyn MentorModel>,
    history: History,
    agent_rng: StreamRng,
    z_rng: StreamRng,
    plan_memos: HashMap<Vec<usize>, PlanMemo>,
    value_memos: HashMap<(usize, usize), ValueMemo>,
}

impl Agent {
    pub fn new(
        cfg: AgentConfig,
        world_class: ModelClass<dyn WorldModel>,
        mentor_class: ModelClass<dyn MentorModel>,
        streams: &RngStreams,
    ) -> Result<Self> {
        cfg.z_noise.validate()?;
        Ok(Self {
            cfg,
            world: BeliefState::new(world_class),
            mentor: BeliefState::new(mentor_class),
            history: History::new(),
            agent_rng: streams.stream(Stream::Agent),
            z_rng: streams.stream(Stream::ZNoise),
            plan_memos: HashMap::new(),
            value_memos: HashMap::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn world_belief(&self) -> &BeliefState<dyn WorldModel> {
        &self.world
    }

    pub fn mentor_belief(&self) -> &BeliefState<dyn MentorModel> {
        &self.mentor
    }

    pub fn world_belief_mut(&mut self) -> &mut BeliefState<dyn WorldModel> {
        &mut self.world
    }

    pub fn mentor_belief_mut(&mut self) -> &mut BeliefState<dyn MentorModel> {
        &mut self.mentor
    }

    pub fn decide(&mut self) -> Result<StepDecision> {
        let cfg = &self.cfg.planner;
        let set = self.world.posterior_up_to_threshold(cfg.beta)?;
        // The max-min is symmetric in the models, so a canonical order lets
        // memos be shared whenever the same set recurs.
        let mut members = set.members;
        members.sort_unstable();
        let rooted: Vec<Rooted> = members
            .iter()
            .map(|&i| (self.world.model(i).as_ref(), self.world.state(i).clone()))
            .collect();
        let memo = self.plan_memos.entry(members.clone()).or_default();
        let (y, pessimistic_action) = plan_with_memo(&rooted, cfg, memo)?;
        let mut decision = StepDecision {
            x: None,
            x_method: None,
            y,
            z: None,
            zero_condition: y < ZERO_TOLERANCE,
            defer: true,
            action: None,
            pessimistic_action,
            model_set_size: members.len(),
            sampled_world: None,
            sampled_mentor: None,
        };
        if decision.zero_condition {
            self.trim_memos();
            return Ok(decision);
        }
        let mi = self.mentor.sample_index(&mut self.agent_rng)?;
        let wi = self.world.sample_index(&mut self.agent_rng)?;
        let policy = (self.mentor.model(mi).as_ref(), self.mentor.state(mi).clone());
        let model = (self.world.model(wi).as_ref(), self.world.state(wi).clone());
        let memo = self.value_memos.entry((mi, wi)).or_default();
        let value = truncated_policy_value_with_memo(policy, model, cfg, &mut self.agent_rng, memo);
        let z = self.cfg.z_noise.sample(&mut self.z_rng);
        decision.x = Some(value.value);
        decision.x_method = Some(value.method);
        decision.z = Some(z);
        decision.defer = deferral_rule(value.value, y, z);
        decision.action = (!decision.defer).then_some(pessimistic_action);
        decision.sampled_world = Some(self.world.model(wi).name().to_string());
        decision.sampled_mentor = Some(self.mentor.model(mi).name().to_string());
        self.trim_memos();
        Ok(decision)
    }

    fn trim_memos(&mut self) {
        let total: usize = self.plan_memos.values().map(HashMap::len).sum::<usize>()
            + self.value_memos.values().map(HashMap::len).sum::<usize>();
        if total > MEMO_BUDGET {
            self.plan_memos.clear();
            self.value_memos.clear();
        }
    }

    /// Folds a completed step into both posteriors and the history. The
    /// mentor posterior only moves on queried steps.
    pub fn observe(&mut self, step: Step) -> Result<()> {
        self.world.observe(&self.history, step)?;
        self.mentor.observe(&self.history, step)?;
        self.history.push(step);
        Ok(())
    }
}

/// Chooses the action (the mentor's on deferral), samples the percept from
/// the true environment and advances it.
pub fn act_or_defer<R: Rng + ?Sized>(
    decision: &StepDecision,
    mentor: &mut dyn MentorProvider,
    env: &mut Environment,
    history: &History,
    rng: &mut R,
) -> Result<Step> {
    let action = if decision.defer {
        mentor.choose(history, decision)?
    } else {
        decision
            .action
            .ok_or_else(|| Error::InvalidConfig("non-deferring decision without action".into()))?
    };
    let percept = env.sample(action, rng)?;
    let step = Step::new(action, percept, decision.defer);
    env.advance(&step);
    Ok(step)
}
