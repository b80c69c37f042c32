//! Headless episodes, sweeps and their tidy outputs.

mod io;
mod metrics;
mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{act_or_defer, Agent, AgentConfig, MentorProvider, ProgrammaticMentor, StepDecision};
use crate::belief::{BeliefState, PosteriorEntry};
use crate::envs::{Environment, ScenarioBundle};
use crate::error::{Error, Result};
use crate::history::{History, Step};
use crate::models::{EventPredicate, MentorModel, ModelState};
use crate::rng::{RngStreams, Stream, StreamRng};
use crate::spaces::Spaces;

pub use io::{
    read_csv, read_jsonl, read_trace_csv, write_csv, write_jsonl, write_trace_csv, OutputFormat,
};
pub use metrics::{window, EpisodeMetrics};
pub use sweep::{run_sweep, run_sweep_with, summarize, SummaryRow, SweepRow, SweepSpec};

/// Number of top world-models logged per step.
pub const POSTERIOR_TOP: usize = 3;

/// One completed step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based step number.
    pub t: usize,
    pub action: String,
    pub action_index: usize,
    pub observation: String,
    pub observation_index: usize,
    pub reward: f64,
    pub queried: bool,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub zero_condition: bool,
    pub model_set_size: usize,
    /// Highest-posterior world-models after the step.
    pub posterior_top: Vec<PosteriorEntry>,
    /// Whether the scenario's event has happened, including this step.
    pub event: Option<bool>,
    /// Probability the true mentor assigns to the action taken.
    pub mentor_prob: f64,
}

/// Tracks the event and the true mentor alongside an episode.
struct Observers {
    event: Option<(Arc<dyn EventPredicate>, ModelState, bool)>,
    mentor: Arc<dyn MentorModel>,
    mentor_state: ModelState,
}

impl Observers {
    fn new(bundle: &ScenarioBundle) -> Self {
        Self {
            event: bundle
                .event
                .as_ref()
                .map(|e| (Arc::clone(e), e.initial_state(), false)),
            mentor: Arc::clone(&bundle.mentor),
            mentor_state: bundle.mentor.initial_state(),
        }
    }

    /// Returns `(event flag, mentor probability)` for `step`, then folds it in.
    fn record(&mut self, step: &Step) -> (Option<bool>, f64) {
        let mentor_prob = self.mentor.action_probs(&self.mentor_state)[step.action];
        self.mentor_state = self.mentor.advance(&self.mentor_state, step);
        let event = self.event.as_mut().map(|(e, state, happened)| {
            *happened = *happened || e.fires(state, step.action);
            *state = e.advance(state, step);
            *happened
        });
        (event, mentor_prob)
    }
}

fn record_for(
    spaces: &Spaces,
    step: &Step,
    t: usize,
    decision: Option<&StepDecision>,
    posterior_top: Vec<PosteriorEntry>,
    observed: (Option<bool>, f64),
) -> TraceRecord {
    TraceRecord {
        t,
        action: spaces.actions.label(step.action).to_string(),
        action_index: step.action,
        observation: spaces.observations.label(step.observation).to_string(),
        observation_index: step.observation,
        reward: spaces.rewards.value(step.reward),
        queried: step.queried,
        x: decision.and_then(|d| d.x),
        y: decision.map(|d| d.y),
        z: decision.and_then(|d| d.z),
        zero_condition: decision.is_some_and(|d| d.zero_condition),
        model_set_size: decision.map_or(0, |d| d.model_set_size),
        posterior_top,
        event: observed.0,
        mentor_prob: observed.1,
    }
}

/// Top world-models normalized over the whole class when it is finite, so
/// the summary does not depend on how far lazy checking has progressed.
fn logged_top(belief: &mut BeliefState<dyn crate::models::WorldModel>) -> Result<Vec<PosteriorEntry>> {
    match belief.check_all() {
        Ok(()) | Err(Error::LazyClassUnsupported) => Ok(belief.top(POSTERIOR_TOP)),
        Err(e) => Err(e),
    }
}

/// What the runner needs next.
#[derive(Debug, Clone, PartialEq)]
pub enum StepPhase {
    /// The agent acts itself; call [`EpisodeRunner::finish_step`] with any provider.
    Ready(StepDecision),
    /// The agent defers; the provider passed to `finish_step` must answer.
    NeedsMentor(StepDecision),
    Finished,
}

/// Drives one episode a step at a time, so that a remote mentor can answer
/// between [`begin_step`](Self::begin_step) and [`finish_step`](Self::finish_step).
pub struct EpisodeRunner {
    agent: Agent,
    env: Environment,
    env_rng: StreamRng,
    observers: Observers,
    spaces: Arc<Spaces>,
    gamma: f64,
    focus_action: Option<usize>,
    steps: usize,
    pending: Option<StepDecision>,
    trace: Vec<TraceRecord>,
    aborted: bool,
}

impl EpisodeRunner {
    pub fn new(bundle: &ScenarioBundle, cfg: AgentConfig, steps: usize, seed: u64) -> Result<Self> {
        let streams = RngStreams::new(seed);
        let gamma = cfg.planner.gamma;
        let mut env = bundle.environment.clone();
        env.reset();
        Ok(Self {
            agent: Agent::new(cfg, bundle.world_class.clone(), bundle.mentor_class.clone(), &streams)?,
            env,
            env_rng: streams.stream(Stream::Env),
            observers: Observers::new(bundle),
            spaces: Arc::clone(bundle.spaces()),
            gamma,
            focus_action: bundle.focus_action,
            steps,
            pending: None,
            trace: Vec::with_capacity(steps),
            aborted: false,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.aborted || self.trace.len() >= self.steps
    }

    pub fn history(&self) -> &History {
        self.agent.history()
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn pending(&self) -> Option<&StepDecision> {
        self.pending.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Decides the next step (once; repeated calls return the same decision).
    pub fn begin_step(&mut self) -> Result<StepPhase> {
        if self.is_finished() {
            return Ok(StepPhase::Finished);
        }
        if self.pending.is_none() {
            self.pending = Some(self.agent.decide()?);
        }
        let d = self.pending.clone().expect("pending decision");
        Ok(if d.defer {
            StepPhase::NeedsMentor(d)
        } else {
            StepPhase::Ready(d)
        })
    }

    /// Executes the pending step, asking `mentor` if the agent deferred.
    pub fn finish_step(&mut self, mentor: &mut dyn MentorProvider) -> Result<&TraceRecord> {
        if self.pending.is_none() {
            self.begin_step()?;
        }
        let decision = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidConfig("episode already finished".into()))?;
        let step = match act_or_defer(&decision, mentor, &mut self.env, self.agent.history(), &mut self.env_rng) {
            Ok(step) => step,
            Err(e) => {
                self.pending = Some(decision);
                return Err(e);
            }
        };
        mentor.observe(&step);
        self.agent.observe(step)?;
        let observed = self.observers.record(&step);
        let record = record_for(
            &self.spaces,
            &step,
            self.trace.len() + 1,
            Some(&decision),
            logged_top(self.agent.world_belief_mut())?,
            observed,
        );
        self.trace.push(record);
        Ok(self.trace.last().expect("just pushed"))
    }

    pub fn step(&mut self, mentor: &mut dyn MentorProvider) -> Result<&TraceRecord> {
        self.begin_step()?;
        self.finish_step(mentor)
    }

    /// Stops the episode; metrics are flagged as partial.
    pub fn abort(&mut self) {
        self.aborted = true;
        self.pending = None;
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics::from_trace(&self.trace, self.gamma, self.focus_action, self.aborted)
    }

    pub fn into_outcome(self, error: Option<String>) -> EpisodeOutcome {
        let metrics = self.metrics();
        EpisodeOutcome {
            trace: self.trace,
            metrics,
            error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub trace: Vec<TraceRecord>,
    pub metrics: EpisodeMetrics,
    /// Why the episode stopped early, if it did.
    pub error: Option<String>,
}

/// Runs the agent with the scenario's programmatic mentor. Failures after
/// setup abort the episode and are reported in the outcome.
pub fn run_episode(bundle: &ScenarioBundle, cfg: AgentConfig, steps: usize, seed: u64) -> Result<EpisodeOutcome> {
    let mut runner = EpisodeRunner::new(bundle, cfg, steps, seed)?;
    let mut mentor = ProgrammaticMentor::new(
        Arc::clone(&bundle.mentor),
        RngStreams::new(seed).stream(Stream::Mentor),
    );
    while !runner.is_finished() {
        if let Err(e) = runner.step(&mut mentor) {
            runner.abort();
            return Ok(runner.into_outcome(Some(e.to_string())));
        }
    }
    Ok(runner.into_outcome(None))
}

/// The mentor acts at every step; no agent is involved.
pub fn run_mentor_only(bundle: &ScenarioBundle, steps: usize, seed: u64, gamma: f64) -> Result<EpisodeOutcome> {
    let streams = RngStreams::new(seed);
    let mut env = bundle.environment.clone();
    env.reset();
    let mut env_rng = streams.stream(Stream::Env);
    let mut mentor = ProgrammaticMentor::new(Arc::clone(&bundle.mentor), streams.stream(Stream::Mentor));
    let mut observers = Observers::new(bundle);
    let spaces = Arc::clone(bundle.spaces());
    let mut trace = Vec::with_capacity(steps);
    for t in 1..=steps {
        let action = mentor.act();
        let step = Step::new(action, env.sample(action, &mut env_rng)?, true);
        env.advance(&step);
        mentor.observe(&step);
        let observed = observers.record(&step);
        trace.push(record_for(&spaces, &step, t, None, Vec::new(), observed));
    }
    let metrics = EpisodeMetrics::from_trace(&trace, gamma, bundle.focus_action, false);
    Ok(EpisodeOutcome {
        trace,
        metrics,
        error: None,
    })
}

/// Result of feeding a saved trace back through fresh beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub metrics: EpisodeMetrics,
    /// Steps whose logged posterior summary differs from the recomputed one.
    pub posterior_mismatches: Vec<usize>,
}

/// Rebuilds the world posterior along `trace` and recomputes its metrics.
pub fn replay_trace(bundle: &ScenarioBundle, trace: &[TraceRecord], gamma: f64) -> Result<ReplayReport> {
    let spaces = bundle.spaces();
    let mut belief = BeliefState::new(bundle.world_class.clone());
    let mut history = History::new();
    let mut mismatches = Vec::new();
    for rec in trace {
        let reward = spaces.rewards.index_near(rec.reward).ok_or_else(|| {
            Error::InvalidConfig(format!("step {}: reward {} not in reward space", rec.t, rec.reward))
        })?;
        if rec.action_index >= spaces.num_actions() || rec.observation_index >= spaces.num_observations() {
            return Err(Error::InvalidConfig(format!("step {}: index out of range", rec.t)));
        }
        let step = Step::new(
            rec.action_index,
            crate::history::Percept::new(rec.observation_index, reward),
            rec.queried,
        );
        belief.observe(&history, step)?;
        history.push(step);
        if !rec.posterior_top.is_empty() && logged_top(&mut belief)? != rec.posterior_top {
            mismatches.push(rec.t);
        }
    }
    Ok(ReplayReport {
        metrics: EpisodeMetrics::from_trace(trace, gamma, bundle.focus_action, false),
        posterior_mismatches: mismatches,
    })
}
