//! Wire frames. Every frame is one JSON object with a `type` field; frames
//! sent by the server also carry a per-connection `seq` that strictly
//! increases.

use pessimist_core::belief::PosteriorEntry;
use pessimist_core::harness::{EpisodeMetrics, TraceRecord};
use serde::{Deserialize, Serialize};

fn default_beta() -> f64 {
    0.9
}

fn default_gamma() -> f64 {
    0.9
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_steps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartParams {
    /// Built-in scenario name or scenario file path on the server.
    pub scenario: String,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientMessage {
    #[serde(rename = "session.start")]
    Start(StartParams),
    #[serde(rename = "mentor.action")]
    MentorAction { request_id: u64, action: String },
    #[serde(rename = "snapshot.request")]
    SnapshotRequest {},
}

/// Rolling figures over the most recent steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsWindow {
    pub steps: usize,
    pub query_rate: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub session_id: String,
    /// Steps completed so far.
    pub t: usize,
    /// Absent in the acknowledgement sent before the first step.
    pub last_step: Option<TraceRecord>,
    pub posterior_top: Vec<PosteriorEntry>,
    #[serde(rename = "Y")]
    pub y: Option<f64>,
    #[serde(rename = "X")]
    pub x: Option<f64>,
    #[serde(rename = "Z")]
    pub z: Option<f64>,
    pub zero_condition: bool,
    pub metrics_window: MetricsWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerMessage {
    #[serde(rename = "state")]
    State(StateFrame),
    #[serde(rename = "defer.request")]
    DeferRequest {
        request_id: u64,
        /// The step being decided (1-based).
        t: usize,
        actions: Vec<String>,
        zero_condition: bool,
    },
    #[serde(rename = "session.end")]
    SessionEnd {
        session_id: String,
        metrics: EpisodeMetrics,
        aborted: bool,
    },
    #[serde(rename = "error")]
    Error { code: String, detail: String },
    #[serde(rename = "snapshot.reply")]
    SnapshotReply { snapshot: Snapshot },
}

/// An outbound frame: the message plus its sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub seq: u64,
    #[serde(flatten)]
    pub message: ServerMessage,
}

impl Frame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }
}

/// Error codes carried by `error` frames.
pub mod codes {
    pub const BAD_FRAME: &str = "bad_frame";
    pub const NO_SESSION: &str = "no_session";
    pub const SESSION_ACTIVE: &str = "session_active";
    pub const STALE_REQUEST: &str = "stale_request";
    pub const ILLEGAL_ACTION: &str = "illegal_action";
    pub const START_FAILED: &str = "start_failed";
    pub const STEP_FAILED: &str = "step_failed";
    pub const UNKNOWN_SESSION: &str = "unknown_session";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Running,
    AwaitingMentor,
    Ended,
}

/// Read-only copy of a session's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: Option<String>,
    pub phase: Phase,
    pub params: Option<StartParams>,
    pub t: usize,
    pub pending_request: Option<u64>,
    pub history: Vec<TraceRecord>,
    pub world_posterior: Vec<PosteriorEntry>,
    pub mentor_posterior: Vec<PosteriorEntry>,
    pub metrics: Option<EpisodeMetrics>,
}
