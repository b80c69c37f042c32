//! The per-connection protocol state machine. It is transport-free: feed it
//! client messages, get back the frames to send.

use std::sync::atomic::{AtomicU64, Ordering};

use pessimist_core::agent::{AgentConfig, FixedMentor, NoMentor};
use pessimist_core::envs::load_scenario;
use pessimist_core::harness::{EpisodeRunner, StepPhase, TraceRecord};

use crate::protocol::{codes, ClientMessage, Frame, MetricsWindow, Phase, ServerMessage, Snapshot, StartParams, StateFrame};

/// Steps covered by a state frame's `metrics_window`.
pub const METRICS_WINDOW: usize = 100;

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

pub struct Session {
    seq: u64,
    id: Option<String>,
    params: Option<StartParams>,
    runner: Option<EpisodeRunner>,
    phase: Phase,
    pending_request: Option<u64>,
    next_request: u64,
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

impl Session {
    pub fn new() -> Self {
        Self {
            seq: 0,
            id: None,
            params: None,
            runner: None,
            phase: Phase::Idle,
            pending_request: None,
            next_request: 1,
        }
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pending_request(&self) -> Option<u64> {
        self.pending_request
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.runner.as_ref().map_or(&[], |r| r.trace())
    }

    /// Parses one inbound text frame and handles it.
    pub fn handle_text(&mut self, text: &str) -> Vec<Frame> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![self.error(codes::BAD_FRAME, e.to_string())],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<Frame> {
        match msg {
            ClientMessage::Start(params) => self.start(params),
            ClientMessage::MentorAction { request_id, action } => self.answer(request_id, &action),
            ClientMessage::SnapshotRequest {} => {
                let snapshot = self.snapshot();
                vec![self.frame(ServerMessage::SnapshotReply { snapshot })]
            }
        }
    }

    /// The mentor did not answer in time: abort the episode.
    pub fn timeout(&mut self) -> Vec<Frame> {
        if self.phase != Phase::AwaitingMentor {
            return Vec::new();
        }
        if let Some(r) = self.runner.as_mut() {
            r.abort();
        }
        let mut out = Vec::new();
        self.end(&mut out);
        out
    }

    pub fn snapshot(&self) -> Snapshot {
        let runner = self.runner.as_ref();
        Snapshot {
            session_id: self.id.clone(),
            phase: self.phase,
            params: self.params.clone(),
            t: runner.map_or(0, |r| r.trace().len()),
            pending_request: self.pending_request,
            history: runner.map_or_else(Vec::new, |r| r.trace().to_vec()),
            world_posterior: runner.map_or_else(Vec::new, |r| r.agent().world_belief().snapshot()),
            mentor_posterior: runner.map_or_else(Vec::new, |r| r.agent().mentor_belief().snapshot()),
            metrics: runner.map(|r| r.metrics()),
        }
    }

    fn frame(&mut self, message: ServerMessage) -> Frame {
        self.seq += 1;
        Frame {
            seq: self.seq,
            message,
        }
    }

    fn error(&mut self, code: &str, detail: impl Into<String>) -> Frame {
        self.frame(ServerMessage::Error {
            code: code.to_string(),
            detail: detail.into(),
        })
    }

    fn start(&mut self, params: StartParams) -> Vec<Frame> {
        if matches!(self.phase, Phase::Running | Phase::AwaitingMentor) {
            return vec![self.error(codes::SESSION_ACTIVE, "a session is already running on this connection")];
        }
        let runner = load_scenario(&params.scenario).and_then(|bundle| {
            let cfg = AgentConfig::new(params.beta, params.gamma, params.epsilon)?;
            EpisodeRunner::new(&bundle, cfg, params.steps, params.seed)
        });
        let runner = match runner {
            Ok(r) => r,
            Err(e) => return vec![self.error(codes::START_FAILED, e.to_string())],
        };
        self.id = Some(format!("s{}", NEXT_SESSION.fetch_add(1, Ordering::Relaxed)));
        self.params = Some(params);
        self.runner = Some(runner);
        self.phase = Phase::Running;
        self.pending_request = None;
        let mut out = vec![self.state_frame(None)];
        self.advance(&mut out);
        out
    }

    fn answer(&mut self, request_id: u64, action: &str) -> Vec<Frame> {
        if self.phase == Phase::Idle {
            return vec![self.error(codes::NO_SESSION, "no session has been started on this connection")];
        }
        if self.phase != Phase::AwaitingMentor || self.pending_request != Some(request_id) {
            let detail = match self.pending_request {
                Some(p) => format!("request {request_id} is not pending (pending: {p})"),
                None => format!("request {request_id} is not pending"),
            };
            return vec![self.error(codes::STALE_REQUEST, detail)];
        }
        let runner = self.runner.as_mut().expect("awaiting implies a runner");
        let Some(index) = runner.spaces().actions.index_of(action) else {
            let legal = runner.spaces().actions.labels().join(", ");
            return vec![self.error(codes::ILLEGAL_ACTION, format!("`{action}` is not one of: {legal}"))];
        };
        let mut out = Vec::new();
        match runner.finish_step(&mut FixedMentor(index)) {
            Ok(record) => {
                let record = record.clone();
                self.pending_request = None;
                self.phase = Phase::Running;
                out.push(self.state_frame(Some(record)));
                self.advance(&mut out);
            }
            Err(e) => self.fail(&mut out, e.to_string()),
        }
        out
    }

    /// Steps until the agent defers or the episode ends.
    fn advance(&mut self, out: &mut Vec<Frame>) {
        loop {
            let runner = self.runner.as_mut().expect("running implies a runner");
            match runner.begin_step() {
                Ok(StepPhase::Finished) => return self.end(out),
                Ok(StepPhase::Ready(_)) => match runner.finish_step(&mut NoMentor) {
                    Ok(record) => {
                        let record = record.clone();
                        out.push(self.state_frame(Some(record)));
                    }
                    Err(e) => return self.fail(out, e.to_string()),
                },
                Ok(StepPhase::NeedsMentor(decision)) => {
                    let t = runner.trace().len() + 1;
                    let actions = runner.spaces().actions.labels().to_vec();
                    let request_id = self.next_request;
                    self.next_request += 1;
                    self.pending_request = Some(request_id);
                    self.phase = Phase::AwaitingMentor;
                    out.push(self.frame(ServerMessage::DeferRequest {
                        request_id,
                        t,
                        actions,
                        zero_condition: decision.zero_condition,
                    }));
                    return;
                }
                Err(e) => return self.fail(out, e.to_string()),
            }
        }
    }

    fn fail(&mut self, out: &mut Vec<Frame>, detail: String) {
        out.push(self.error(codes::STEP_FAILED, detail));
        if let Some(r) = self.runner.as_mut() {
            r.abort();
        }
        self.end(out);
    }

    fn end(&mut self, out: &mut Vec<Frame>) {
        let runner = self.runner.as_ref().expect("ending implies a runner");
        let (metrics, aborted) = (runner.metrics(), runner.is_aborted());
        self.phase = Phase::Ended;
        self.pending_request = None;
        let session_id = self.id.clone().unwrap_or_default();
        out.push(self.frame(ServerMessage::SessionEnd {
            session_id,
            metrics,
            aborted,
        }));
    }

    fn state_frame(&mut self, last_step: Option<TraceRecord>) -> Frame {
        let trace = self.trace();
        let recent = &trace[trace.len().saturating_sub(METRICS_WINDOW)..];
        let n = recent.len().max(1) as f64;
        let metrics_window = MetricsWindow {
            steps: recent.len(),
            query_rate: recent.iter().filter(|r| r.queried).count() as f64 / n,
            mean_reward: recent.iter().map(|r| r.reward).sum::<f64>() / n,
        };
        let state = StateFrame {
            session_id: self.id.clone().unwrap_or_default(),
            t: trace.len(),
            posterior_top: last_step.as_ref().map_or_else(Vec::new, |r| r.posterior_top.clone()),
            y: last_step.as_ref().and_then(|r| r.y),
            x: last_step.as_ref().and_then(|r| r.x),
            z: last_step.as_ref().and_then(|r| r.z),
            zero_condition: last_step.as_ref().is_some_and(|r| r.zero_condition),
            last_step,
            metrics_window,
        };
        self.frame(ServerMessage::State(state))
    }
}
