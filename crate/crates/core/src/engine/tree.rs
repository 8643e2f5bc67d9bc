use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::engine::def::{ActionModel, ConditionModel, NodeDef, NodeKind};
use crate::engine::{Behavior, NodeStatus, Predicate};
use crate::progress::{ConstantAction, NoisyLinearAction, PerpetualAction, ProfileAction, Progress};
use crate::scalar::Scalar;
use crate::seed::{leaf_rng, LeafRng};
use crate::sync::{self, BarrierSet, RelThreshold, SyncParallelState};

/// Preorder index of a node inside a [`Tree`]. The root is `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("{kind} node has no children")]
    EmptyComposite { kind: &'static str },
    #[error("leaf `{name}` has children")]
    LeafWithChildren { name: String },
    #[error("leaf name `{name}` is used more than once")]
    DuplicateLeaf { name: String },
    #[error("leaf `{name}` is bound to unknown handle `{handle}`")]
    UnboundHandle { name: String, handle: String },
    #[error("child {child} of a synchronized parallel has no progress function")]
    NotProgressAware { child: String },
}

type ActionFactory<S> = Arc<dyn Fn() -> Box<dyn Behavior<S>> + Send + Sync>;
type PredicateFactory = Arc<dyn Fn() -> Box<dyn Predicate> + Send + Sync>;

/// Named factories for [`ActionModel::Handle`] and [`ConditionModel::Handle`] leaves.
pub struct Registry<S> {
    actions: HashMap<String, ActionFactory<S>>,
    predicates: HashMap<String, PredicateFactory>,
}

impl<S> Default for Registry<S> {
    fn default() -> Self {
        Self {
            actions: HashMap::new(),
            predicates: HashMap::new(),
        }
    }
}

impl<S: Scalar> Registry<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn action<F, B>(mut self, handle: impl Into<String>, factory: F) -> Self
    where
        F: Fn() -> B + Send + Sync + 'static,
        B: Behavior<S> + 'static,
    {
        self.actions
            .insert(handle.into(), Arc::new(move || Box::new(factory())));
        self
    }

    pub fn predicate<F, P>(mut self, handle: impl Into<String>, factory: F) -> Self
    where
        F: Fn() -> P + Send + Sync + 'static,
        P: Predicate + 'static,
    {
        self.predicates
            .insert(handle.into(), Arc::new(move || Box::new(factory())));
        self
    }
}

/// Outcome of one tick of the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickResult {
    pub status: NodeStatus,
    /// Nodes that received a tick this cycle, in tick order.
    pub ticked: Vec<NodeId>,
}

impl TickResult {
    pub fn was_ticked(&self, id: NodeId) -> bool {
        self.ticked.contains(&id)
    }
}

struct LeafState<S> {
    name: String,
    behavior: Box<dyn Behavior<S>>,
    rng: LeafRng,
    last_status: Option<NodeStatus>,
}

struct ConditionState {
    name: String,
    predicate: Box<dyn Predicate>,
    last_status: Option<NodeStatus>,
}

enum Runtime<S> {
    Sequence,
    Fallback,
    Parallel,
    AbsSync {
        barriers: BarrierSet<S>,
        state: SyncParallelState<S>,
    },
    RelSync {
        delta: RelThreshold<S>,
        state: SyncParallelState<S>,
    },
    Action(Box<LeafState<S>>),
    Condition(ConditionState),
}

struct Node<S> {
    runtime: Runtime<S>,
    children: Vec<NodeId>,
}

/// Executable instance of a [`NodeDef`]. Single-threaded: one executor ticks it at a time.
pub struct Tree<S> {
    nodes: Vec<Node<S>>,
    leaves: Vec<NodeId>,
    seed: u64,
}

impl<S: Scalar> Tree<S> {
    pub fn build(def: &NodeDef<S>) -> Result<Self, BuildError> {
        Self::build_with(def, &Registry::default())
    }

    pub fn build_with(def: &NodeDef<S>, registry: &Registry<S>) -> Result<Self, BuildError> {
        let mut tree = Tree {
            nodes: Vec::new(),
            leaves: Vec::new(),
            seed: 0,
        };
        let mut names = HashSet::new();
        tree.add(def, registry, &mut names)?;
        tree.check_sync_children()?;
        Ok(tree)
    }

    fn add(
        &mut self,
        def: &NodeDef<S>,
        registry: &Registry<S>,
        names: &mut HashSet<String>,
    ) -> Result<NodeId, BuildError> {
        let id = NodeId(self.nodes.len());
        let composite = |kind: &'static str| {
            if def.children.is_empty() {
                Err(BuildError::EmptyComposite { kind })
            } else {
                Ok(())
            }
        };
        let runtime = match &def.kind {
            NodeKind::Sequence => composite("sequence").map(|_| Runtime::Sequence)?,
            NodeKind::Fallback => composite("fallback").map(|_| Runtime::Fallback)?,
            NodeKind::Parallel => composite("parallel").map(|_| Runtime::Parallel)?,
            NodeKind::AbsSyncParallel(barriers) => {
                composite("parallel_abs")?;
                Runtime::AbsSync {
                    barriers: barriers.clone(),
                    state: SyncParallelState::new(def.children.len()),
                }
            }
            NodeKind::RelSyncParallel(delta) => {
                composite("parallel_rel")?;
                Runtime::RelSync {
                    delta: *delta,
                    state: SyncParallelState::new(def.children.len()),
                }
            }
            NodeKind::Action { name, model } => {
                Self::check_leaf(name, def, names)?;
                let behavior = instantiate_action(name, model, registry)?;
                Runtime::Action(Box::new(LeafState {
                    name: name.clone(),
                    behavior,
                    rng: leaf_rng(0, name),
                    last_status: None,
                }))
            }
            NodeKind::Condition { name, model } => {
                Self::check_leaf(name, def, names)?;
                let predicate: Box<dyn Predicate> = match model {
                    ConditionModel::Constant(value) => {
                        let value = *value;
                        Box::new(move || value)
                    }
                    ConditionModel::Handle(handle) => registry
                        .predicates
                        .get(handle)
                        .map(|f| f())
                        .ok_or_else(|| BuildError::UnboundHandle {
                            name: name.clone(),
                            handle: handle.clone(),
                        })?,
                };
                Runtime::Condition(ConditionState {
                    name: name.clone(),
                    predicate,
                    last_status: None,
                })
            }
        };
        if def.kind.is_leaf() {
            self.leaves.push(id);
        }
        self.nodes.push(Node {
            runtime,
            children: Vec::with_capacity(def.children.len()),
        });
        for child in &def.children {
            let child_id = self.add(child, registry, names)?;
            self.nodes[id.0].children.push(child_id);
        }
        Ok(id)
    }

    fn check_leaf(name: &str, def: &NodeDef<S>, names: &mut HashSet<String>) -> Result<(), BuildError> {
        if !def.children.is_empty() {
            return Err(BuildError::LeafWithChildren { name: name.into() });
        }
        if !names.insert(name.to_string()) {
            return Err(BuildError::DuplicateLeaf { name: name.into() });
        }
        Ok(())
    }

    fn check_sync_children(&self) -> Result<(), BuildError> {
        for node in &self.nodes {
            if !matches!(node.runtime, Runtime::AbsSync { .. } | Runtime::RelSync { .. }) {
                continue;
            }
            for &child in &node.children {
                if self.progress(child).is_none() {
                    return Err(BuildError::NotProgressAware {
                        child: self.describe(child),
                    });
                }
            }
        }
        Ok(())
    }

    fn describe(&self, id: NodeId) -> String {
        match &self.nodes[id.0].runtime {
            Runtime::Action(l) => format!("action `{}`", l.name),
            Runtime::Condition(c) => format!("condition `{}`", c.name),
            Runtime::Sequence => format!("sequence #{}", id.0),
            Runtime::Fallback => format!("fallback #{}", id.0),
            _ => format!("parallel #{}", id.0),
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    /// Leaves in preorder.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_name(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id.0].runtime {
            Runtime::Action(l) => Some(&l.name),
            Runtime::Condition(c) => Some(&c.name),
            _ => None,
        }
    }

    pub fn find_leaf(&self, name: &str) -> Option<NodeId> {
        self.leaves
            .iter()
            .copied()
            .find(|&id| self.leaf_name(id) == Some(name))
    }

    /// Progress of an action leaf; `None` for composites, conditions and
    /// actions without a progress function.
    pub fn progress(&self, id: NodeId) -> Option<Progress<S>> {
        match &self.nodes[id.0].runtime {
            Runtime::Action(l) => l.behavior.progress(),
            _ => None,
        }
    }

    /// Status a leaf returned the last time it was ticked.
    pub fn last_status(&self, id: NodeId) -> Option<NodeStatus> {
        match &self.nodes[id.0].runtime {
            Runtime::Action(l) => l.last_status,
            Runtime::Condition(c) => c.last_status,
            _ => None,
        }
    }

    pub fn sync_state(&self, id: NodeId) -> Option<&SyncParallelState<S>> {
        match &self.nodes[id.0].runtime {
            Runtime::AbsSync { state, .. } | Runtime::RelSync { state, .. } => Some(state),
            _ => None,
        }
    }

    pub fn is_parallel(&self, id: NodeId) -> bool {
        matches!(
            self.nodes[id.0].runtime,
            Runtime::Parallel | Runtime::AbsSync { .. } | Runtime::RelSync { .. }
        )
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(
            self.nodes[id.0].runtime,
            Runtime::Action(_) | Runtime::Condition(_)
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Resets every node and re-keys every leaf's random stream on `seed`.
    pub fn reset(&mut self, seed: u64) {
        self.seed = seed;
        self.halt(self.root());
        for node in &mut self.nodes {
            if let Runtime::Action(leaf) = &mut node.runtime {
                leaf.rng = leaf_rng(seed, &leaf.name);
            }
        }
    }

    /// Ticks the root once.
    pub fn tick(&mut self) -> TickResult {
        let mut ticked = Vec::new();
        let status = self.tick_node(self.root(), &mut ticked);
        TickResult { status, ticked }
    }

    fn tick_node(&mut self, id: NodeId, ticked: &mut Vec<NodeId>) -> NodeStatus {
        ticked.push(id);
        let n = self.nodes[id.0].children.len();
        match &mut self.nodes[id.0].runtime {
            Runtime::Action(leaf) => {
                let status = leaf.behavior.tick(&mut leaf.rng);
                leaf.last_status = Some(status);
                status
            }
            Runtime::Condition(cond) => {
                let status = if cond.predicate.evaluate() {
                    NodeStatus::Success
                } else {
                    NodeStatus::Failure
                };
                cond.last_status = Some(status);
                status
            }
            Runtime::Sequence => self.tick_ordered(id, n, NodeStatus::Success, ticked),
            Runtime::Fallback => self.tick_ordered(id, n, NodeStatus::Failure, ticked),
            Runtime::Parallel => {
                let statuses: Vec<_> = (0..n)
                    .map(|i| {
                        let child = self.nodes[id.0].children[i];
                        self.tick_node(child, ticked)
                    })
                    .collect();
                sync::aggregate(&statuses)
            }
            Runtime::AbsSync { .. } | Runtime::RelSync { .. } => self.tick_synchronized(id, ticked),
        }
    }

    /// Sequence (`proceed_on = Success`) and Fallback (`proceed_on = Failure`).
    fn tick_ordered(
        &mut self,
        id: NodeId,
        n: usize,
        proceed_on: NodeStatus,
        ticked: &mut Vec<NodeId>,
    ) -> NodeStatus {
        for i in 0..n {
            let child = self.nodes[id.0].children[i];
            let status = self.tick_node(child, ticked);
            if status != proceed_on {
                // Children to the right no longer receive ticks: abort them.
                for j in i + 1..n {
                    let later = self.nodes[id.0].children[j];
                    self.halt(later);
                }
                return status;
            }
        }
        proceed_on
    }

    fn tick_synchronized(&mut self, id: NodeId, ticked: &mut Vec<NodeId>) -> NodeStatus {
        let children = self.nodes[id.0].children.clone();
        let progress: Vec<Progress<S>> = children
            .iter()
            .map(|&c| self.progress(c).expect("checked at build time"))
            .collect();
        let mask = match &mut self.nodes[id.0].runtime {
            Runtime::AbsSync { barriers, state } => {
                let (current, mask) = sync::plan_abs_sync(&progress, barriers);
                state.current_barrier = Some(current);
                mask
            }
            Runtime::RelSync { delta, .. } => sync::plan_rel_sync(&progress, *delta),
            _ => unreachable!("not a synchronized parallel"),
        };
        for (i, &child) in children.iter().enumerate() {
            if mask[i] {
                let status = self.tick_node(child, ticked);
                if let Runtime::AbsSync { state, .. } | Runtime::RelSync { state, .. } =
                    &mut self.nodes[id.0].runtime
                {
                    state.last_status[i] = status;
                }
            }
        }
        match &self.nodes[id.0].runtime {
            Runtime::AbsSync { state, .. } | Runtime::RelSync { state, .. } => {
                sync::aggregate(&state.last_status)
            }
            _ => unreachable!(),
        }
    }

    /// Aborts the subtree rooted at `id`, resetting all node state.
    pub fn halt(&mut self, id: NodeId) {
        match &mut self.nodes[id.0].runtime {
            Runtime::Action(leaf) => {
                leaf.behavior.halt();
                leaf.last_status = None;
            }
            Runtime::Condition(cond) => cond.last_status = None,
            Runtime::AbsSync { state, .. } | Runtime::RelSync { state, .. } => state.reset(),
            Runtime::Sequence | Runtime::Fallback | Runtime::Parallel => {}
        }
        for i in 0..self.nodes[id.0].children.len() {
            let child = self.nodes[id.0].children[i];
            self.halt(child);
        }
    }
}

fn instantiate_action<S: Scalar>(
    name: &str,
    model: &ActionModel<S>,
    registry: &Registry<S>,
) -> Result<Box<dyn Behavior<S>>, BuildError> {
    Ok(match model {
        ActionModel::NoisyLinear(p) => Box::new(NoisyLinearAction::new(*p)),
        ActionModel::Profile(p) => Box::new(ProfileAction::new(*p)),
        ActionModel::Perpetual {
            params,
            initial_error,
        } => Box::new(PerpetualAction::new(*params, *initial_error)),
        ActionModel::Constant(status) => Box::new(ConstantAction::new(*status)),
        ActionModel::Handle(handle) => registry
            .actions
            .get(handle)
            .map(|f| f())
            .ok_or_else(|| BuildError::UnboundHandle {
                name: name.into(),
                handle: handle.clone(),
            })?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progress::NoisyLinearParams;
    use NodeStatus::*;

    fn constant(name: &str, s: NodeStatus) -> NodeDef<f64> {
        NodeDef::action(name, ActionModel::Constant(s))
    }

    fn noisy(name: &str, alpha: f64) -> NodeDef<f64> {
        NodeDef::noisy(name, NoisyLinearParams::new(alpha, 0.0).unwrap())
    }

    #[test]
    fn sequence_short_circuits() {
        let def = NodeDef::sequence(vec![
            constant("a", Success),
            constant("b", Running),
            constant("c", Success),
        ]);
        let mut tree = Tree::build(&def).unwrap();
        let r = tree.tick();
        assert_eq!(r.status, Running);
        assert_eq!(r.ticked, vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert!(!r.was_ticked(NodeId(3)));
    }

    #[test]
    fn fallback_short_circuits() {
        let def = NodeDef::fallback(vec![
            constant("a", Failure),
            constant("b", Success),
            constant("c", Failure),
        ]);
        let r = Tree::build(&def).unwrap().tick();
        assert_eq!(r.status, Success);
        assert!(!r.was_ticked(NodeId(3)));
    }

    #[test]
    fn conditions_never_run() {
        let def = NodeDef::<f64>::sequence(vec![
            NodeDef::condition("t", ConditionModel::Constant(true)),
            NodeDef::condition("f", ConditionModel::Constant(false)),
        ]);
        let mut tree = Tree::build(&def).unwrap();
        assert_eq!(tree.tick().status, Failure);
        assert_eq!(tree.last_status(NodeId(1)), Some(Success));
        assert_eq!(tree.last_status(NodeId(2)), Some(Failure));
    }

    #[test]
    fn preempted_action_is_reset() {
        // The gate fails on the third tick, so the action is aborted.
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let calls = Arc::new(calls);
        let gate = {
            let calls = calls.clone();
            move || calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) < 2
        };
        let registry = Registry::new().predicate("gate", move || {
            let gate = gate.clone();
            move || gate()
        });
        let def = NodeDef::sequence(vec![
            NodeDef::condition("g", ConditionModel::Handle("gate".into())),
            noisy("a", 0.1),
        ]);
        let mut tree = Tree::build_with(&def, &registry).unwrap();
        tree.tick();
        tree.tick();
        let a = tree.find_leaf("a").unwrap();
        assert!(tree.progress(a).unwrap().get() > 0.19);
        assert_eq!(tree.tick().status, Failure);
        assert_eq!(tree.progress(a).unwrap().get(), 0.0);
    }

    #[test]
    fn paused_child_keeps_progress() {
        let b = BarrierSet::new(vec![0.5, 1.0]).unwrap();
        let def = NodeDef::abs_sync(b, vec![noisy("slow", 0.1), noisy("fast", 0.5)]);
        let mut tree = Tree::build(&def).unwrap();
        let fast = tree.find_leaf("fast").unwrap();
        tree.tick(); // 0.1, 0.5
        tree.tick(); // 0.2, 1.0 (0.5 <= 0.5 is admitted)
        assert_eq!(tree.progress(fast).unwrap().get(), 1.0);
        let r = tree.tick();
        assert!(!r.was_ticked(fast));
        assert_eq!(tree.progress(fast).unwrap().get(), 1.0);
        assert_eq!(tree.last_status(fast), Some(Success));
    }

    #[test]
    fn build_errors() {
        let empty = NodeDef::<f64>::sequence(vec![]);
        assert_eq!(
            Tree::build(&empty).err(),
            Some(BuildError::EmptyComposite { kind: "sequence" })
        );
        let dup = NodeDef::parallel(vec![noisy("a", 0.1), noisy("a", 0.2)]);
        assert!(matches!(Tree::build(&dup), Err(BuildError::DuplicateLeaf { .. })));
        let unbound = NodeDef::<f64>::action("x", ActionModel::Handle("nope".into()));
        assert!(matches!(
            Tree::build(&unbound),
            Err(BuildError::UnboundHandle { .. })
        ));
        let no_progress = NodeDef::rel_sync(
            RelThreshold::new(0.1).unwrap(),
            vec![noisy("a", 0.1), constant("b", Running)],
        );
        assert!(matches!(
            Tree::build(&no_progress),
            Err(BuildError::NotProgressAware { .. })
        ));
        let nested = NodeDef::abs_sync(
            BarrierSet::default(),
            vec![NodeDef::sequence(vec![noisy("a", 0.1)])],
        );
        assert!(matches!(
            Tree::build(&nested),
            Err(BuildError::NotProgressAware { .. })
        ));
    }

    #[test]
    fn registry_binds_custom_behaviors() {
        struct Twice(u8);
        impl Behavior<f64> for Twice {
            fn tick(&mut self, _: &mut LeafRng) -> NodeStatus {
                self.0 += 1;
                if self.0 >= 2 { Success } else { Running }
            }
            fn halt(&mut self) {
                self.0 = 0;
            }
        }
        let reg = Registry::new().action("twice", || Twice(0));
        let def = NodeDef::action("t", ActionModel::Handle("twice".into()));
        let mut tree = Tree::build_with(&def, &reg).unwrap();
        assert_eq!(tree.tick().status, Running);
        assert_eq!(tree.tick().status, Success);
    }
}
