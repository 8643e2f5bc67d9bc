//! Absolute and relative progress synchronization for parallel nodes.
//!
//! Both nodes decide, once per tick, which children receive the tick. A
//! withheld tick pauses a child: it keeps its state, its progress, and the
//! status it returned the last time it was actually ticked.

use serde::Serialize;
use thiserror::Error;

use crate::engine::NodeStatus;
use crate::progress::Progress;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyncError {
    #[error("barrier {index} is outside (0, 1]")]
    BarrierOutOfRange { index: usize },
    #[error("barrier {index} does not exceed the previous barrier")]
    BarriersNotIncreasing { index: usize },
    #[error("delta must lie in [0, 1]")]
    DeltaOutOfRange,
}

/// Strictly increasing progress barriers in `(0, 1]`. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BarrierSet<S>(Vec<S>);

impl<S: Scalar> BarrierSet<S> {
    pub fn new(values: Vec<S>) -> Result<Self, SyncError> {
        for (index, &b) in values.iter().enumerate() {
            if !(b > S::zero() && b <= S::one()) {
                return Err(SyncError::BarrierOutOfRange { index });
            }
            if index > 0 && b <= values[index - 1] {
                return Err(SyncError::BarriersNotIncreasing { index });
            }
        }
        Ok(Self(values))
    }

    /// `{i / n : i = 1..=n}`; empty for `n = 0`.
    pub fn equidistant(n: usize) -> Self {
        let denom = S::from_usize_lossy(n.max(1));
        Self((1..=n).map(|i| S::from_usize_lossy(i) / denom).collect())
    }

    pub fn values(&self) -> &[S] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_one(&self) -> bool {
        self.0.last().is_some_and(|&b| b == S::one())
    }

    /// Smallest barrier strictly above `min_progress`, or the exhausted sentinel.
    pub fn current(&self, min_progress: Progress<S>) -> CurrentBarrier<S> {
        self.0
            .iter()
            .find(|&&b| b > min_progress.get())
            .map_or(CurrentBarrier::Exhausted, |&b| CurrentBarrier::At(b))
    }
}

/// The barrier in force during one tick of an absolute synchronized parallel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CurrentBarrier<S> {
    At(S),
    /// No barrier lies above the minimum progress: every child is ticked.
    Exhausted,
}

impl<S: Scalar> CurrentBarrier<S> {
    /// Tick guard: a child exactly at the barrier is still ticked.
    pub fn admits(&self, progress: Progress<S>) -> bool {
        match *self {
            CurrentBarrier::At(b) => progress.get() <= b,
            CurrentBarrier::Exhausted => true,
        }
    }
}

/// Maximum lead `delta ∈ [0, 1]` over the slowest sibling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelThreshold<S>(S);

impl<S: Scalar> RelThreshold<S> {
    pub fn new(delta: S) -> Result<Self, SyncError> {
        if delta >= S::zero() && delta <= S::one() {
            Ok(Self(delta))
        } else {
            Err(SyncError::DeltaOutOfRange)
        }
    }

    pub fn get(&self) -> S {
        self.0
    }

    pub fn admits(&self, progress: Progress<S>, min_progress: Progress<S>) -> bool {
        progress.get() <= min_progress.get() + self.0
    }
}

/// Minimum progress, folded from an initial value of 1.
pub fn min_progress<S: Scalar>(progress: &[Progress<S>]) -> Progress<S> {
    progress
        .iter()
        .fold(Progress::one(), |m, &p| if p < m { p } else { m })
}

/// Which children an absolute synchronized parallel ticks, and under which barrier.
pub fn plan_abs_sync<S: Scalar>(
    progress: &[Progress<S>],
    barriers: &BarrierSet<S>,
) -> (CurrentBarrier<S>, Vec<bool>) {
    let current = barriers.current(min_progress(progress));
    let mask = progress.iter().map(|&p| current.admits(p)).collect();
    (current, mask)
}

/// Which children a relative synchronized parallel ticks.
pub fn plan_rel_sync<S: Scalar>(progress: &[Progress<S>], delta: RelThreshold<S>) -> Vec<bool> {
    let min = min_progress(progress);
    progress.iter().map(|&p| delta.admits(p, min)).collect()
}

/// Parallel status rule: Success iff all succeed, Failure iff any fails.
pub fn aggregate(statuses: &[NodeStatus]) -> NodeStatus {
    if statuses.iter().all(|&s| s == NodeStatus::Success) {
        NodeStatus::Success
    } else if statuses.contains(&NodeStatus::Failure) {
        NodeStatus::Failure
    } else {
        NodeStatus::Running
    }
}

/// Per-node memory of a synchronized parallel, persisted across ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncParallelState<S> {
    pub last_status: Vec<NodeStatus>,
    pub current_barrier: Option<CurrentBarrier<S>>,
}

impl<S: Scalar> SyncParallelState<S> {
    pub fn new(children: usize) -> Self {
        Self {
            last_status: vec![NodeStatus::Running; children],
            current_barrier: None,
        }
    }

    pub fn reset(&mut self) {
        self.last_status.fill(NodeStatus::Running);
        self.current_barrier = None;
    }
}
