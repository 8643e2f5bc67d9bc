use thiserror::Error;

use crate::engine::tree::{BuildError, Registry, Tree};
use crate::engine::{NodeDef, NodeStatus};
use crate::scalar::Scalar;
use crate::trace::{Channel, TraceEntry, TrialTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("max_ticks must be at least 1")]
    NoTicks,
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Discrete clock: `t_k = t0 + k * dt`, recomputed from `k` so it never drifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutionState {
    pub k: u64,
    pub t0: f64,
    pub dt: f64,
}

impl ExecutionState {
    pub fn new(dt: f64) -> Result<Self, EpisodeError> {
        if dt > 0.0 && dt.is_finite() {
            Ok(Self { k: 0, t0: 0.0, dt })
        } else {
            Err(EpisodeError::InvalidTimeStep(dt))
        }
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.k as f64 * self.dt
    }

    pub fn advance(&mut self) {
        self.k += 1;
    }
}

/// Runs one seeded episode: one root tick per `dt` until the root stops
/// running or `max_ticks` is reached.
pub fn run_episode<S: Scalar>(
    def: &NodeDef<S>,
    dt: f64,
    max_ticks: u64,
    seed: u64,
) -> Result<TrialTrace<S>, EpisodeError> {
    let mut tree = Tree::build(def)?;
    tree.run_episode(dt, max_ticks, seed)
}

impl<S: Scalar> Tree<S> {
    /// Builds with `registry` and runs one episode.
    pub fn episode_with(
        def: &NodeDef<S>,
        registry: &Registry<S>,
        dt: f64,
        max_ticks: u64,
        seed: u64,
    ) -> Result<TrialTrace<S>, EpisodeError> {
        Tree::build_with(def, registry)?.run_episode(dt, max_ticks, seed)
    }

    /// Resets the tree on `seed` and runs one episode.
    pub fn run_episode(
        &mut self,
        dt: f64,
        max_ticks: u64,
        seed: u64,
    ) -> Result<TrialTrace<S>, EpisodeError> {
        let mut clock = ExecutionState::new(dt)?;
        if max_ticks == 0 {
            return Err(EpisodeError::NoTicks);
        }
        self.reset(seed);

        let channels: Vec<Channel> = self
            .leaves()
            .iter()
            .map(|&id| Channel {
                id,
                name: self.leaf_name(id).unwrap_or_default().to_string(),
                progress_aware: self.progress(id).is_some(),
            })
            .collect();
        let monitored = self.monitored_channels(&channels);
        let initial_progress = channels
            .iter()
            .map(|c| self.progress(c.id).map(|p| p.get()))
            .collect();

        let mut entries = Vec::new();
        let mut status = NodeStatus::Running;
        while status == NodeStatus::Running && clock.k < max_ticks {
            let result = self.tick();
            clock.advance();
            status = result.status;
            entries.push(TraceEntry {
                k: clock.k,
                t: clock.time(),
                root: status,
                progress: channels
                    .iter()
                    .map(|c| self.progress(c.id).map(|p| p.get()))
                    .collect(),
                status: channels.iter().map(|c| self.last_status(c.id)).collect(),
                ticked: channels.iter().map(|c| result.was_ticked(c.id)).collect(),
                ticked_nodes: result.ticked,
            });
        }

        Ok(TrialTrace {
            seed,
            t0: clock.t0,
            dt,
            channels,
            monitored,
            initial_progress,
            entries,
            truncated: status == NodeStatus::Running,
        })
    }

    /// Children of the first parallel (in preorder) whose children are all
    /// leaves; otherwise every progress-aware leaf.
    fn monitored_channels(&self, channels: &[Channel]) -> Vec<usize> {
        let parallel = (0..self.len())
            .map(crate::engine::NodeId)
            .find(|&id| self.is_parallel(id) && self.children(id).iter().all(|&c| self.is_leaf(c)));
        match parallel {
            Some(id) => self
                .children(id)
                .iter()
                .filter_map(|c| channels.iter().position(|ch| ch.id == *c))
                .filter(|&i| channels[i].progress_aware)
                .collect(),
            None => (0..channels.len())
                .filter(|&i| channels[i].progress_aware)
                .collect(),
        }
    }
}
