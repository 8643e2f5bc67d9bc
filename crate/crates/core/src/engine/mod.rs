//! Tick semantics and the discrete-time execution loop.

mod def;
mod episode;
mod tree;

use serde::{Deserialize, Serialize};

use crate::progress::Progress;
use crate::scalar::Scalar;
use crate::seed::LeafRng;

pub use def::{ActionModel, ConditionModel, NodeDef, NodeKind, Span};
pub use episode::{run_episode, EpisodeError, ExecutionState};
pub use tree::{BuildError, NodeId, Registry, TickResult, Tree};

/// Status returned by every node on every tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Success,
    Running,
    Failure,
}

impl NodeStatus {
    pub const ALL: [NodeStatus; 3] = [NodeStatus::Success, NodeStatus::Running, NodeStatus::Failure];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Success => "success",
            NodeStatus::Running => "running",
            NodeStatus::Failure => "failure",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.as_str() == text)
    }
}

impl std::fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Behavior bound to an Action leaf.
///
/// `tick` is called only when the leaf receives a tick. A synchronized
/// parallel that withholds a tick leaves the behavior untouched; `halt` is
/// called when an ancestor preempts the subtree and must reset all state.
pub trait Behavior<S: Scalar>: Send {
    fn tick(&mut self, rng: &mut LeafRng) -> NodeStatus;

    /// Current progress, or `None` if the behavior is not progress-aware.
    fn progress(&self) -> Option<Progress<S>> {
        None
    }

    fn halt(&mut self);
}

/// Predicate bound to a Condition leaf.
pub trait Predicate: Send {
    fn evaluate(&mut self) -> bool;
}

impl<F: FnMut() -> bool + Send> Predicate for F {
    fn evaluate(&mut self) -> bool {
        self()
    }
}
