//! Per-episode execution records.

use serde::Serialize;

use crate::engine::{NodeId, NodeStatus};

/// A leaf observed by the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Channel {
    pub id: NodeId,
    pub name: String,
    pub progress_aware: bool,
}

/// State after tick `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct TraceEntry<S> {
    pub k: u64,
    pub t: f64,
    pub root: NodeStatus,
    /// Progress per channel; `None` for leaves without a progress function.
    pub progress: Vec<Option<S>>,
    /// Status each channel returned the last time it was ticked.
    pub status: Vec<Option<NodeStatus>>,
    /// Whether each channel received a tick during this cycle.
    pub ticked: Vec<bool>,
    pub ticked_nodes: Vec<NodeId>,
}

/// Record of one seeded episode. Entry `i` holds tick `k = i + 1`; the state
/// at `k = 0` is kept in `initial_progress`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Serialize")]
pub struct TrialTrace<S> {
    pub seed: u64,
    pub t0: f64,
    pub dt: f64,
    pub channels: Vec<Channel>,
    /// Channels compared by the progress distance: the children of the
    /// observed parallel node.
    pub monitored: Vec<usize>,
    pub initial_progress: Vec<Option<S>>,
    pub entries: Vec<TraceEntry<S>>,
    pub truncated: bool,
}

impl<S: Copy> TrialTrace<S> {
    /// Index of the last tick.
    pub fn last_tick(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn final_status(&self) -> Option<NodeStatus> {
        self.entries.last().map(|e| e.root)
    }

    pub fn channel(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn time_at(&self, k: u64) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Progress of `channel` at tick `k`, for `k` in `0..=last_tick()`.
    pub fn progress_at(&self, k: u64, channel: usize) -> Option<S> {
        if k == 0 {
            self.initial_progress.get(channel).copied().flatten()
        } else {
            self.entries
                .get(k as usize - 1)
                .and_then(|e| e.progress.get(channel).copied().flatten())
        }
    }

    /// Same trace with every timestamp moved by `offset` seconds.
    pub fn shifted(&self, offset: f64) -> Self
    where
        S: Clone,
    {
        let mut out = self.clone();
        out.t0 += offset;
        for e in &mut out.entries {
            e.t = out.t0 + e.k as f64 * out.dt;
        }
        out
    }
}
